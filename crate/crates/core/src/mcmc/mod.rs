//! Metropolis–Hastings samplers over change-point configurations.
//!
//! With a known number of change-points the chain targets `pi(p | x)`; with
//! an unknown number it targets `pi(p, l | x)` using birth, death and
//! within-`l` moves. Segment models and parameters are integrated out, so the
//! state is just the change-point vector.

mod proposal;
mod ratio;
mod summary;

pub use proposal::{propose_fixed, propose_variable, MoveKind, Proposal};
pub use ratio::{accept_ratio_variable, count_move_correction, log_ratio_fixed};
pub use summary::{summarize, MapEstimate, Summary};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bct::BctParams;
use crate::changepoint::{log_prior_positions, ChangePoints, EvidenceCache, JointEvidence, DEFAULT_CACHE_CAPACITY};
use crate::sequence::Sequence;
use crate::{Error, Result};

/// Generator used by every chain.
pub type ChainRng = ChaCha8Rng;

/// Above this many retained states the trace keeps histograms only.
pub const DEFAULT_MAX_STORED: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Mode {
    /// Known number of change-points.
    Fixed { ell: usize },
    /// Unknown number, uniform prior on `0..=ell_max`.
    Variable { ell_max: usize },
}

impl Mode {
    /// Largest number of change-points a state can hold.
    pub fn max_ell(&self) -> usize {
        match *self {
            Mode::Fixed { ell } => ell,
            Mode::Variable { ell_max } => ell_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub depth: usize,
    /// `None` selects the default `1 - 2^(-m+1)`.
    pub beta: Option<f64>,
    pub mode: Mode,
    pub thinning: usize,
    pub cache_capacity: usize,
    pub max_stored: usize,
}

impl McmcConfig {
    pub fn new(mode: Mode, depth: usize, iterations: usize, burn_in: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in,
            seed,
            depth,
            beta: None,
            mode,
            thinning: 1,
            cache_capacity: DEFAULT_CACHE_CAPACITY,
            max_stored: DEFAULT_MAX_STORED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidParameter(format!(
                "burn-in {} must be below the iteration count {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidParameter("thinning must be at least 1".into()));
        }
        match self.mode {
            Mode::Fixed { ell: 0 } => Err(Error::InvalidParameter(
                "fixed mode needs at least one change-point".into(),
            )),
            Mode::Variable { ell_max } if ell_max < 2 => Err(Error::InvalidParameter(format!(
                "ell_max = {ell_max}; at least 2 is required"
            ))),
            _ => Ok(()),
        }
    }

    pub fn params(&self, seq: &Sequence) -> Result<BctParams> {
        BctParams::new(seq.alphabet().size(), self.depth, self.beta)
    }
}

/// One retained chain state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub iteration: usize,
    pub state: ChangePoints,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Retained samples plus streaming histograms of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub n: usize,
    pub mode: Mode,
    /// Retained states, empty once `retained` exceeded the storage cap.
    pub samples: Vec<Sample>,
    pub samples_complete: bool,
    pub retained: u64,
    /// Counts of `l` over retained states, indexed by `l`.
    pub ell_hist: Vec<u64>,
    /// Pooled change-point locations over retained states.
    pub loc_hist: BTreeMap<usize, u64>,
    /// `l -> rank -> position -> count`.
    pub rank_hist: BTreeMap<usize, Vec<BTreeMap<usize, u64>>>,
    pub moves: BTreeMap<MoveKind, MoveStats>,
    /// Highest-posterior state visited (including burn-in) and its log value.
    pub best: Option<(ChangePoints, f64)>,
    /// Wall-clock milliseconds per 1000 iterations (empty on wasm).
    pub ms_per_1000: Vec<f64>,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

impl Trace {
    fn new(n: usize, mode: Mode) -> Self {
        Self {
            n,
            mode,
            samples: Vec::new(),
            samples_complete: true,
            retained: 0,
            ell_hist: vec![0; mode.max_ell() + 1],
            loc_hist: BTreeMap::new(),
            rank_hist: BTreeMap::new(),
            moves: BTreeMap::new(),
            best: None,
            ms_per_1000: Vec::new(),
            cache_hits: 0,
            cache_misses: 0,
        }
    }

    fn record(&mut self, iteration: usize, state: &ChangePoints, max_stored: usize) {
        self.retained += 1;
        let ell = state.ell();
        self.ell_hist[ell] += 1;
        let ranks = self.rank_hist.entry(ell).or_insert_with(|| vec![BTreeMap::new(); ell]);
        for (r, &p) in state.positions().iter().enumerate() {
            *self.loc_hist.entry(p).or_default() += 1;
            *ranks[r].entry(p).or_default() += 1;
        }
        if self.samples_complete {
            if self.samples.len() < max_stored {
                self.samples.push(Sample {
                    iteration,
                    state: state.clone(),
                });
            } else {
                self.samples.clear();
                self.samples.shrink_to_fit();
                self.samples_complete = false;
            }
        }
    }

    fn observe_best(&mut self, state: &ChangePoints, log_post: f64) {
        if self.best.as_ref().is_none_or(|(_, b)| log_post > *b) {
            self.best = Some((state.clone(), log_post));
        }
    }

    /// Pool another chain's histograms and samples into this one.
    pub fn merge(&mut self, other: &Trace) -> Result<()> {
        if other.n != self.n || other.mode != self.mode {
            return Err(Error::InvalidParameter("cannot merge traces of different runs".into()));
        }
        self.retained += other.retained;
        for (a, b) in self.ell_hist.iter_mut().zip(&other.ell_hist) {
            *a += b;
        }
        for (&p, &c) in &other.loc_hist {
            *self.loc_hist.entry(p).or_default() += c;
        }
        for (&ell, ranks) in &other.rank_hist {
            let mine = self.rank_hist.entry(ell).or_insert_with(|| vec![BTreeMap::new(); ell]);
            for (r, h) in ranks.iter().enumerate() {
                for (&p, &c) in h {
                    *mine[r].entry(p).or_default() += c;
                }
            }
        }
        for (&k, s) in &other.moves {
            let e = self.moves.entry(k).or_default();
            e.proposed += s.proposed;
            e.accepted += s.accepted;
        }
        if let Some((s, v)) = &other.best {
            self.observe_best(s, *v);
        }
        self.samples_complete &= other.samples_complete;
        if self.samples_complete {
            self.samples.extend(other.samples.iter().cloned());
        } else {
            self.samples.clear();
        }
        self.cache_hits += other.cache_hits;
        self.cache_misses += other.cache_misses;
        Ok(())
    }

    /// `iteration,ell,p_1,...` rows; short states are padded with empty fields.
    pub fn to_csv(&self) -> String {
        let width = self.mode.max_ell();
        let mut out = String::from("iteration,ell");
        for i in 1..=width {
            out.push_str(&format!(",p_{i}"));
        }
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!("{},{}", s.iteration, s.state.ell()));
            for i in 0..width {
                out.push(',');
                if let Some(p) = s.state.positions().get(i) {
                    out.push_str(&p.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Equally spaced starting points `1 + round(i (n-1) / (l+1))`.
pub fn equispaced(n: usize, ell: usize) -> Result<ChangePoints> {
    let pos: Vec<usize> = (1..=ell)
        .map(|i| 1 + ((i * (n - 1)) as f64 / (ell + 1) as f64).round() as usize)
        .collect();
    let cp = ChangePoints::new(n, pos)
        .map_err(|_| Error::InvalidParameter(format!("n = {n} is too short for {ell} change-points")))?;
    if log_prior_positions(&cp) == f64::NEG_INFINITY {
        return Err(Error::InvalidParameter(format!(
            "n = {n} is too short for {ell} change-points"
        )));
    }
    Ok(cp)
}

/// One chain: state, evidence cache and generator.
pub struct Chain<'a> {
    evidence: JointEvidence<'a>,
    mode: Mode,
    rng: ChainRng,
    state: ChangePoints,
    log_evidence: f64,
}

impl<'a> Chain<'a> {
    pub fn new(seq: &'a Sequence, config: &McmcConfig) -> Result<Self> {
        config.validate()?;
        let params = config.params(seq)?;
        let n = seq.n();
        let state = match config.mode {
            Mode::Fixed { ell } => equispaced(n, ell)?,
            Mode::Variable { .. } => {
                if n < 5 {
                    return Err(Error::InvalidParameter(format!("n = {n} < 5")));
                }
                ChangePoints::none(n)
            }
        };
        let mut evidence = JointEvidence::with_cache(seq, params, EvidenceCache::new(config.cache_capacity))?;
        let log_evidence = evidence.log_joint_evidence(&state);
        Ok(Self {
            evidence,
            mode: config.mode,
            rng: ChainRng::seed_from_u64(config.seed),
            state,
            log_evidence,
        })
    }

    pub fn state(&self) -> &ChangePoints {
        &self.state
    }

    /// `ln P(x|p) + ln pi(p|l)` of the current state.
    pub fn log_posterior(&self) -> f64 {
        self.log_evidence + log_prior_positions(&self.state)
    }

    pub fn evidence(&self) -> &JointEvidence<'a> {
        &self.evidence
    }

    /// One propose/accept step. Returns the move kind and whether it was accepted.
    pub fn step(&mut self) -> Result<(MoveKind, bool)> {
        let proposal = match self.mode {
            Mode::Fixed { .. } => propose_fixed(&self.state, &mut self.rng),
            Mode::Variable { ell_max } => propose_variable(&self.state, ell_max, &mut self.rng),
        };
        let candidate = &proposal.candidate;
        // zero-prior candidates are rejected without evaluating their evidence
        let candidate_ev = if *candidate == self.state {
            self.log_evidence
        } else if candidate.log_gap_product() == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.evidence.log_joint_evidence(candidate)
        };
        let log_r = match self.mode {
            Mode::Fixed { .. } => log_ratio_fixed(&self.state, self.log_evidence, candidate, candidate_ev),
            Mode::Variable { ell_max } => accept_ratio_variable(
                &self.state,
                self.log_evidence,
                candidate,
                candidate_ev,
                proposal.kind,
                ell_max,
            )?,
        };
        let u: f64 = self.rng.gen();
        let accept = u.ln() < log_r;
        if accept {
            self.log_evidence = candidate_ev;
            self.state = proposal.candidate;
        }
        Ok((proposal.kind, accept))
    }
}

/// Run `config.iterations` steps and record post-burn-in states.
pub fn run(seq: &Sequence, config: &McmcConfig) -> Result<Trace> {
    let mut chain = Chain::new(seq, config)?;
    let mut trace = Trace::new(seq.n(), config.mode);
    trace.observe_best(&chain.state, chain.log_posterior());
    #[cfg(not(target_arch = "wasm32"))]
    let mut clock = std::time::Instant::now();
    for t in 1..=config.iterations {
        let (kind, accepted) = chain.step()?;
        let stats = trace.moves.entry(kind).or_default();
        stats.proposed += 1;
        if accepted {
            stats.accepted += 1;
            trace.observe_best(&chain.state, chain.log_posterior());
        }
        if t > config.burn_in && (t - config.burn_in).is_multiple_of(config.thinning) {
            trace.record(t, &chain.state, config.max_stored);
        }
        #[cfg(not(target_arch = "wasm32"))]
        if t % 1000 == 0 {
            trace.ms_per_1000.push(clock.elapsed().as_secs_f64() * 1e3);
            clock = std::time::Instant::now();
        }
    }
    trace.cache_hits = chain.evidence.cache().hits();
    trace.cache_misses = chain.evidence.cache().misses();
    Ok(trace)
}

/// Run independent chains with seeds `seed, seed + 1, ...` and merge them.
pub fn run_chains(seq: &Sequence, config: &McmcConfig, chains: usize) -> Result<Vec<Trace>> {
    let configs: Vec<McmcConfig> = (0..chains.max(1) as u64)
        .map(|k| McmcConfig {
            seed: config.seed.wrapping_add(k),
            ..config.clone()
        })
        .collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        configs.par_iter().map(|c| run(seq, c)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        configs.iter().map(|c| run(seq, c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::Alphabet;

    fn toy() -> Sequence {
        toy_depth(1)
    }

    fn toy_depth(d: usize) -> Sequence {
        let obs: Vec<u8> = (0..60)
            .map(|i| if i < 30 { (i % 2) as u8 } else { u8::from(i % 7 == 0) })
            .collect();
        Sequence::new(Alphabet::numeric(2).unwrap(), &vec![1; d], &obs).unwrap()
    }

    #[test]
    fn config_validation() {
        let c = McmcConfig::new(Mode::Fixed { ell: 0 }, 1, 10, 0, 0);
        assert!(c.validate().is_err());
        let c = McmcConfig::new(Mode::Variable { ell_max: 1 }, 1, 10, 0, 0);
        assert!(c.validate().is_err());
        let c = McmcConfig::new(Mode::Variable { ell_max: 2 }, 1, 10, 10, 0);
        assert!(c.validate().is_err());
        let c = McmcConfig::new(Mode::Variable { ell_max: 2 }, 1, 10, 9, 0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn equispaced_start() {
        assert_eq!(equispaced(100, 1).unwrap().positions(), &[51]);
        assert_eq!(equispaced(10, 2).unwrap().positions(), &[4, 7]);
        assert!(equispaced(6, 2).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let s = toy_depth(2);
        let c = McmcConfig::new(Mode::Variable { ell_max: 3 }, 2, 3000, 500, 42);
        let a = run(&s, &c).unwrap();
        let b = run(&s, &c).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.samples, b.samples);
        let c2 = McmcConfig { seed: 43, ..c };
        assert_ne!(run(&s, &c2).unwrap().samples, a.samples);
    }

    #[test]
    fn invariants_along_the_chain() {
        let s = toy_depth(2);
        let c = McmcConfig::new(Mode::Variable { ell_max: 3 }, 2, 4000, 0, 7);
        let mut chain = Chain::new(&s, &c).unwrap();
        for _ in 0..4000 {
            chain.step().unwrap();
            assert!(chain.state().ell() <= 3);
            assert!(chain.log_posterior() > f64::NEG_INFINITY);
        }
        let c = McmcConfig::new(Mode::Fixed { ell: 2 }, 2, 2000, 0, 7);
        let mut chain = Chain::new(&s, &c).unwrap();
        for _ in 0..2000 {
            chain.step().unwrap();
            assert_eq!(chain.state().ell(), 2);
            assert!(chain.log_posterior() > f64::NEG_INFINITY);
        }
    }

    #[test]
    fn trace_bookkeeping() {
        let s = toy();
        let mut c = McmcConfig::new(Mode::Variable { ell_max: 2 }, 1, 1000, 100, 1);
        c.thinning = 3;
        let t = run(&s, &c).unwrap();
        assert_eq!(t.retained, 300);
        assert_eq!(t.samples.len(), 300);
        assert_eq!(t.ell_hist.iter().sum::<u64>(), 300);
        assert_eq!(t.samples[0].iteration, 103);
        let proposed: u64 = t.moves.values().map(|m| m.proposed).sum();
        assert_eq!(proposed, 1000);
        let csv = t.to_csv();
        assert!(csv.starts_with("iteration,ell,p_1,p_2\n103,"));
        assert_eq!(csv.lines().count(), 301);
    }

    #[test]
    fn streaming_mode_keeps_histograms() {
        let s = toy();
        let mut c = McmcConfig::new(Mode::Fixed { ell: 1 }, 1, 500, 0, 3);
        c.max_stored = 10;
        let t = run(&s, &c).unwrap();
        assert!(!t.samples_complete);
        assert!(t.samples.is_empty());
        assert_eq!(t.retained, 500);
        assert_eq!(t.loc_hist.values().sum::<u64>(), 500);
    }

    #[test]
    fn merged_chains_pool_counts() {
        let s = toy();
        let c = McmcConfig::new(Mode::Variable { ell_max: 2 }, 1, 800, 200, 5);
        let traces = run_chains(&s, &c, 3).unwrap();
        assert_eq!(traces.len(), 3);
        let mut merged = traces[0].clone();
        for t in &traces[1..] {
            merged.merge(t).unwrap();
        }
        assert_eq!(merged.retained, 1800);
        assert_eq!(merged.samples.len(), 1800);
        assert_eq!(traces[0].samples, run(&s, &c).unwrap().samples);
        assert_ne!(traces[0].samples, traces[1].samples);
    }
}
