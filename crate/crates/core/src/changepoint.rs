//! Change-point configurations, their priors, and the joint evidence of a
//! segmentation.
//!
//! Positions are 1-based observation indices. With `p_0 = 1` and
//! `p_{l+1} = n`, segment 1 is `x_1 ..= x_{p_1 - 1}`, segment `j` is
//! `x_{p_{j-1}} ..= x_{p_j - 1}` and the last segment is `x_{p_l} ..= x_n`.
//! Each segment's initial context is the `D` symbols preceding its start.

use std::num::NonZeroUsize;

use lru::LruCache;
use serde::{Deserialize, Serialize};

use crate::bct::{BctParams, Ctw};
use crate::logmath::{ln_binomial, normalize_log_weights};
use crate::sequence::Sequence;
use crate::{Error, Result};

pub const DEFAULT_CACHE_CAPACITY: usize = 1_000_000;

/// Interior change-points `p_1 < ... < p_l` of a series of length `n`.
///
/// Adjacent points are representable; they only get zero prior mass.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChangePoints {
    n: usize,
    positions: Vec<usize>,
}

impl ChangePoints {
    pub fn new(n: usize, positions: Vec<usize>) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidChangePoints("empty series".into()));
        }
        if let Some(&p) = positions.iter().find(|&&p| p < 2 || p + 1 > n) {
            return Err(Error::InvalidChangePoints(format!(
                "position {p} outside 2..={}",
                n.saturating_sub(1)
            )));
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidChangePoints(format!(
                "{positions:?} not strictly increasing"
            )));
        }
        Ok(Self { n, positions })
    }

    pub fn none(n: usize) -> Self {
        Self {
            n,
            positions: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of interior change-points `l`.
    pub fn ell(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn contains(&self, p: usize) -> bool {
        self.positions.binary_search(&p).is_ok()
    }

    /// `(p_0, ..., p_{l+1})` including the end-point sentinels.
    pub fn boundaries(&self) -> Vec<usize> {
        let mut b = Vec::with_capacity(self.ell() + 2);
        b.push(1);
        b.extend_from_slice(&self.positions);
        b.push(self.n);
        b
    }

    /// `(start, end)` observation ranges, inclusive, 1-based.
    pub fn segment_ranges(&self) -> Vec<(usize, usize)> {
        let mut starts = vec![1];
        starts.extend_from_slice(&self.positions);
        let mut ends: Vec<usize> = self.positions.iter().map(|p| p - 1).collect();
        ends.push(self.n);
        starts.into_iter().zip(ends).collect()
    }

    /// `ln prod_{j=0}^{l} (p_{j+1} - p_j - 1)`; `-inf` if any factor is 0.
    pub fn log_gap_product(&self) -> f64 {
        self.boundaries()
            .windows(2)
            .map(|w| match w[1] - w[0] {
                0 | 1 => f64::NEG_INFINITY,
                g => ((g - 1) as f64).ln(),
            })
            .sum()
    }

    pub(crate) fn from_sorted_unchecked(n: usize, positions: Vec<usize>) -> Self {
        debug_assert!(Self::new(n, positions.clone()).is_ok());
        Self { n, positions }
    }
}

/// One segment of a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentView {
    /// 1-based segment index.
    pub index: usize,
    pub start: usize,
    pub end: usize,
}

#[allow(clippy::len_without_is_empty)]
impl SegmentView {
    /// Number of observations; segments are never empty.
    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    /// Initial context (`D` symbols) followed by the segment's observations.
    pub fn window<'a>(&self, seq: &'a Sequence) -> &'a [crate::Symbol] {
        seq.window(self.start, self.end)
    }

    /// The segment as a standalone sequence with its own initial context.
    pub fn to_sequence(&self, seq: &Sequence) -> Sequence {
        let w = self.window(seq);
        Sequence::new(seq.alphabet().clone(), &w[..seq.depth()], &w[seq.depth()..]).expect("segments are non-empty")
    }
}

pub fn partition(seq: &Sequence, cp: &ChangePoints) -> Result<Vec<SegmentView>> {
    if cp.n() != seq.n() {
        return Err(Error::InvalidChangePoints(format!(
            "change-points for n={} applied to n={}",
            cp.n(),
            seq.n()
        )));
    }
    Ok(cp
        .segment_ranges()
        .into_iter()
        .enumerate()
        .map(|(j, (start, end))| SegmentView {
            index: j + 1,
            start,
            end,
        })
        .collect())
}

/// `ln pi(p | l) = ln prod_j (p_{j+1} - p_j - 1) - ln C(n-2, 2l+1)`.
///
/// For `l = 0` this is 0: the single configuration has probability 1.
pub fn log_prior_positions(cp: &ChangePoints) -> f64 {
    if cp.ell() == 0 {
        return 0.0;
    }
    let n = cp.n() as u64;
    let k = 2 * cp.ell() as u64 + 1;
    if n < 2 || n - 2 < k {
        return f64::NEG_INFINITY;
    }
    cp.log_gap_product() - ln_binomial(n - 2, k)
}

/// Uniform prior on `0..=ell_max`.
pub fn log_prior_count(ell: usize, ell_max: usize) -> Result<f64> {
    if ell > ell_max {
        return Err(Error::InvalidParameter(format!("ell {ell} > ell_max {ell_max}")));
    }
    Ok(-((1 + ell_max) as f64).ln())
}

/// Which prior on the number of change-points enters the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CountPrior {
    /// `l` is known; its (constant) prior is dropped.
    Fixed,
    /// Uniform on `0..=ell_max`.
    Uniform { ell_max: usize },
}

/// LRU cache of segment evidences keyed by `(start, end)`.
///
/// Keys do not include `D` or `beta`; a cache belongs to one configuration.
pub struct EvidenceCache {
    map: Option<LruCache<(usize, usize), f64>>,
    hits: u64,
    misses: u64,
}

impl EvidenceCache {
    pub fn new(capacity: usize) -> Self {
        Self {
            map: NonZeroUsize::new(capacity).map(LruCache::new),
            hits: 0,
            misses: 0,
        }
    }

    pub fn disabled() -> Self {
        Self::new(0)
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn len(&self) -> usize {
        self.map.as_ref().map_or(0, LruCache::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        if let Some(m) = &mut self.map {
            m.clear();
        }
        self.hits = 0;
        self.misses = 0;
    }

    fn get_or_insert(&mut self, key: (usize, usize), compute: impl FnOnce() -> f64) -> f64 {
        match &mut self.map {
            None => {
                self.misses += 1;
                compute()
            }
            Some(map) => {
                if let Some(&v) = map.get(&key) {
                    self.hits += 1;
                    return v;
                }
                self.misses += 1;
                let v = compute();
                map.put(key, v);
                v
            }
        }
    }
}

impl std::fmt::Debug for EvidenceCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EvidenceCache")
            .field("len", &self.len())
            .field("hits", &self.hits)
            .field("misses", &self.misses)
            .finish()
    }
}

/// Joint evidence `P(x | p) = prod_j P*_D(x(j; p))` for one sequence, with a
/// per-chain evidence cache.
#[derive(Debug)]
pub struct JointEvidence<'a> {
    seq: &'a Sequence,
    ctw: Ctw,
    cache: EvidenceCache,
}

impl<'a> JointEvidence<'a> {
    pub fn new(seq: &'a Sequence, params: BctParams) -> Result<Self> {
        Self::with_cache(seq, params, EvidenceCache::new(DEFAULT_CACHE_CAPACITY))
    }

    pub fn with_cache(seq: &'a Sequence, params: BctParams, cache: EvidenceCache) -> Result<Self> {
        params.check_sequence(seq)?;
        Ok(Self {
            seq,
            ctw: Ctw::new(params),
            cache,
        })
    }

    pub fn sequence(&self) -> &'a Sequence {
        self.seq
    }

    pub fn params(&self) -> &BctParams {
        self.ctw.params()
    }

    pub fn cache(&self) -> &EvidenceCache {
        &self.cache
    }

    /// `ln P*_D(x_start ..= x_end)` given the `D` preceding symbols.
    pub fn segment_log_evidence(&mut self, start: usize, end: usize) -> f64 {
        let seq = self.seq;
        let ctw = &mut self.ctw;
        self.cache
            .get_or_insert((start, end), || ctw.log_evidence(seq.window(start, end)))
    }

    pub fn log_joint_evidence(&mut self, cp: &ChangePoints) -> f64 {
        debug_assert_eq!(cp.n(), self.seq.n());
        cp.segment_ranges()
            .into_iter()
            .map(|(s, e)| self.segment_log_evidence(s, e))
            .sum()
    }

    /// `ln P(x | p) + ln pi(p | l) [+ ln pi(l)]`, `-inf` off the prior support.
    ///
    /// The evidence is not computed for zero-prior configurations.
    pub fn log_posterior_unnorm(&mut self, cp: &ChangePoints, prior: CountPrior) -> Result<f64> {
        let count = match prior {
            CountPrior::Fixed => 0.0,
            CountPrior::Uniform { ell_max } => log_prior_count(cp.ell(), ell_max)?,
        };
        let lp = log_prior_positions(cp);
        if lp == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.log_joint_evidence(cp) + lp + count)
    }
}

/// Exact posterior of a single change-point location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactPosterior {
    pub positions: Vec<usize>,
    pub probs: Vec<f64>,
}

impl ExactPosterior {
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        self.positions[best]
    }

    pub fn prob(&self, position: usize) -> f64 {
        self.positions.binary_search(&position).map_or(0.0, |i| self.probs[i])
    }

    /// `position,probability` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("position,probability\n");
        for (p, q) in self.positions.iter().zip(&self.probs) {
            out.push_str(&format!("{p},{q:e}\n"));
        }
        out
    }
}

/// `pi(p_1 | x)` for every `p_1` in `2..=n-1` by direct normalisation.
pub fn exact_single_cp_posterior(seq: &Sequence, params: &BctParams) -> Result<ExactPosterior> {
    params.check_sequence(seq)?;
    let n = seq.n();
    if n < 4 {
        return Err(Error::InvalidParameter(format!("n = {n} < 4")));
    }
    let positions: Vec<usize> = (2..n).collect();
    let log_k = ln_binomial(n as u64 - 2, 3);
    let score = |ctw: &mut Ctw, p: usize| -> f64 {
        let gaps = ((p - 2) * (n - p - 1)) as f64;
        if gaps == 0.0 {
            return f64::NEG_INFINITY;
        }
        ctw.log_evidence(seq.window(1, p - 1)) + ctw.log_evidence(seq.window(p, n)) + gaps.ln() - log_k
    };

    #[cfg(feature = "parallel")]
    let log_w: Vec<f64> = {
        use rayon::prelude::*;
        positions
            .par_iter()
            .map_init(|| Ctw::new(*params), |ctw, &p| score(ctw, p))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let log_w: Vec<f64> = {
        let mut ctw = Ctw::new(*params);
        positions.iter().map(|&p| score(&mut ctw, p)).collect()
    };

    if log_w.iter().all(|&w| w == f64::NEG_INFINITY) {
        return Err(Error::NoSupport(format!(
            "no single change-point has positive prior for n = {n}"
        )));
    }
    Ok(ExactPosterior {
        probs: normalize_log_weights(&log_w),
        positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bct::{brute_force_evidence, ctw_log_evidence};
    use crate::logmath::log_sum_exp;
    use crate::sequence::Alphabet;
    use proptest::prelude::*;

    fn binary(ctx: &[u8], obs: &[u8]) -> Sequence {
        Sequence::new(Alphabet::numeric(2).unwrap(), ctx, obs).unwrap()
    }

    /// All strictly increasing `ell`-subsets of `2..=n-1`.
    fn all_configs(n: usize, ell: usize) -> Vec<Vec<usize>> {
        fn rec(from: usize, n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if left == 0 {
                out.push(cur.clone());
                return;
            }
            for p in from..n {
                cur.push(p);
                rec(p + 1, n, left - 1, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(2, n, ell, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn validation() {
        assert!(ChangePoints::new(10, vec![1]).is_err());
        assert!(ChangePoints::new(10, vec![10]).is_err());
        assert!(ChangePoints::new(10, vec![5, 5]).is_err());
        assert!(ChangePoints::new(10, vec![6, 5]).is_err());
        assert!(ChangePoints::new(10, vec![4, 5]).is_ok());
    }

    #[test]
    fn partition_examples() {
        let s = binary(&[0], &[0; 10]);
        let segs = partition(&s, &ChangePoints::none(10)).unwrap();
        assert_eq!(
            segs,
            vec![SegmentView {
                index: 1,
                start: 1,
                end: 10
            }]
        );
        let segs = partition(&s, &ChangePoints::new(10, vec![4, 7]).unwrap()).unwrap();
        let ranges: Vec<_> = segs.iter().map(|v| (v.start, v.end)).collect();
        assert_eq!(ranges, vec![(1, 3), (4, 6), (7, 10)]);
    }

    #[test]
    fn segment_context_comes_from_previous_segment() {
        let s = Sequence::new(Alphabet::numeric(3).unwrap(), &[2, 2], &[0, 1, 0, 1, 2, 1]).unwrap();
        let cp = ChangePoints::new(6, vec![4]).unwrap();
        let segs = partition(&s, &cp).unwrap();
        let second = segs[1].to_sequence(&s);
        assert_eq!(second.context(), &[1, 0]);
        assert_eq!(second.observations(), &[1, 2, 1]);
        let first = segs[0].to_sequence(&s);
        assert_eq!(first.context(), &[2, 2]);
    }

    #[test]
    fn prior_examples() {
        let cp = ChangePoints::new(5, vec![3]).unwrap();
        assert!(log_prior_positions(&cp).abs() < 1e-15);
        for p in [2, 4] {
            assert_eq!(
                log_prior_positions(&ChangePoints::new(5, vec![p]).unwrap()),
                f64::NEG_INFINITY
            );
        }
        let adj = ChangePoints::new(20, vec![5, 6]).unwrap();
        assert_eq!(log_prior_positions(&adj), f64::NEG_INFINITY);
        assert_eq!(log_prior_positions(&ChangePoints::none(20)), 0.0);
    }

    #[test]
    fn position_prior_normalises() {
        for (n, ell) in [(12, 2), (15, 3), (9, 1), (30, 2)] {
            let lp: Vec<f64> = all_configs(n, ell)
                .into_iter()
                .map(|p| log_prior_positions(&ChangePoints::new(n, p).unwrap()))
                .collect();
            assert!(log_sum_exp(&lp).abs() < 1e-12, "n={n} ell={ell}");
        }
    }

    #[test]
    fn count_prior() {
        assert!((log_prior_count(4, 10).unwrap() - (1.0f64 / 11.0).ln()).abs() < 1e-15);
        assert_eq!(log_prior_count(0, 0).unwrap(), 0.0);
        assert!(log_prior_count(3, 2).is_err());
    }

    #[test]
    fn joint_evidence_is_sum_of_segments() {
        let obs: Vec<u8> = (0..30).map(|i| ((i * 7 + i / 3) % 2) as u8).collect();
        let s = binary(&[1, 0], &obs);
        let params = BctParams::new(2, 2, None).unwrap();
        let mut je = JointEvidence::new(&s, params).unwrap();
        let full = ctw_log_evidence(&s, &params).unwrap();
        assert_eq!(je.log_joint_evidence(&ChangePoints::none(30)), full);

        let cp = ChangePoints::new(30, vec![13]).unwrap();
        let segs = partition(&s, &cp).unwrap();
        let expected: f64 = segs
            .iter()
            .map(|v| brute_force_evidence(&v.to_sequence(&s), &params).unwrap())
            .sum();
        assert!((je.log_joint_evidence(&cp) - expected).abs() < 1e-10);
        // second evaluation is served from the cache with the same value
        let misses = je.cache().misses();
        assert!((je.log_joint_evidence(&cp) - expected).abs() < 1e-10);
        assert_eq!(je.cache().misses(), misses);
        assert!(je.cache().hits() >= 2);
    }

    #[test]
    fn posterior_enumeration_normalises() {
        let obs: Vec<u8> = (0..20)
            .map(|i| if i < 10 { (i % 2) as u8 } else { u8::from(i % 5 == 0) })
            .collect();
        let s = binary(&[0], &obs);
        let params = BctParams::new(2, 1, None).unwrap();
        let mut je = JointEvidence::new(&s, params).unwrap();
        let prior = CountPrior::Uniform { ell_max: 2 };
        let mut lw = Vec::new();
        for ell in 0..=2 {
            for p in all_configs(20, ell) {
                lw.push(
                    je.log_posterior_unnorm(&ChangePoints::new(20, p).unwrap(), prior)
                        .unwrap(),
                );
            }
        }
        let probs = normalize_log_weights(&lw);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let adj = ChangePoints::new(20, vec![6, 7]).unwrap();
        assert_eq!(je.log_posterior_unnorm(&adj, prior).unwrap(), f64::NEG_INFINITY);
        assert!(je
            .log_posterior_unnorm(&ChangePoints::new(20, vec![1 + 2, 6, 9]).unwrap(), prior)
            .is_err());
    }

    #[test]
    fn exact_posterior_matches_unnormalised_posterior() {
        let obs: Vec<u8> = (0..20).map(|i| if i < 9 { 0 } else { (i % 2) as u8 }).collect();
        let s = binary(&[1], &obs);
        let params = BctParams::new(2, 1, None).unwrap();
        let exact = exact_single_cp_posterior(&s, &params).unwrap();
        assert!((exact.probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert_eq!(exact.prob(2), 0.0);
        assert_eq!(exact.prob(19), 0.0);

        let mut je = JointEvidence::with_cache(&s, params, EvidenceCache::disabled()).unwrap();
        let lw: Vec<f64> = (2..20)
            .map(|p| {
                je.log_posterior_unnorm(&ChangePoints::new(20, vec![p]).unwrap(), CountPrior::Fixed)
                    .unwrap()
            })
            .collect();
        let direct = normalize_log_weights(&lw);
        for (a, b) in exact.probs.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(exact.to_csv().starts_with("position,probability\n2,0e0\n"));
    }

    #[test]
    fn exact_posterior_needs_support() {
        let s = binary(&[0], &[0, 1, 0, 1]);
        let params = BctParams::new(2, 1, None).unwrap();
        assert!(matches!(
            exact_single_cp_posterior(&s, &params),
            Err(Error::NoSupport(_))
        ));
        let s = binary(&[0], &[0, 1, 0]);
        assert!(exact_single_cp_posterior(&s, &params).is_err());
    }

    proptest! {
        #[test]
        fn partition_covers_series(n in 3usize..200, raw in proptest::collection::btree_set(2usize..200, 0..8)) {
            let pos: Vec<usize> = raw.into_iter().filter(|&p| p < n).collect();
            let cp = ChangePoints::new(n, pos).unwrap();
            let s = binary(&[], &vec![0; n]);
            let segs = partition(&s, &cp).unwrap();
            prop_assert_eq!(segs.len(), cp.ell() + 1);
            prop_assert_eq!(segs.iter().map(SegmentView::len).sum::<usize>(), n);
            prop_assert_eq!(segs[0].start, 1);
            prop_assert_eq!(segs.last().unwrap().end, n);
            for w in segs.windows(2) {
                prop_assert_eq!(w[0].end + 1, w[1].start);
            }
        }

        #[test]
        fn cache_is_transparent(
            obs in proptest::collection::vec(0u8..2, 12..40),
            moves in proptest::collection::vec((2usize..40, 2usize..40), 1..20),
        ) {
            let n = obs.len();
            let s = binary(&[0, 1], &obs);
            let params = BctParams::new(2, 2, None).unwrap();
            let mut cached = JointEvidence::with_cache(&s, params, EvidenceCache::new(4)).unwrap();
            let mut fresh = JointEvidence::with_cache(&s, params, EvidenceCache::disabled()).unwrap();
            for (a, b) in moves {
                let mut pos: Vec<usize> = [a, b].into_iter().filter(|&p| p < n).collect();
                pos.sort_unstable();
                pos.dedup();
                let cp = ChangePoints::new(n, pos).unwrap();
                let prior = CountPrior::Uniform { ell_max: 2 };
                let x = cached.log_posterior_unnorm(&cp, prior).unwrap();
                let y = fresh.log_posterior_unnorm(&cp, prior).unwrap();
                prop_assert!(x == y || (x.is_infinite() && y.is_infinite()));
            }
        }
    }
}
