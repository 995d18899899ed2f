//! Piece-wise homogeneous variable-memory chains: generation from explicit
//! tree models, and stationary analysis of fitted models.

use std::collections::BTreeMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::bct::TreeModel;
use crate::changepoint::ChangePoints;
use crate::mcmc::ChainRng;
use crate::sequence::{Alphabet, Sequence};
use crate::{Error, Result, Symbol};

/// Largest context state space `m^d` the stationary solver accepts.
pub const MAX_STATES: u128 = 1_000_000;
/// Kernels up to this size fall back to a direct solve.
pub const DIRECT_SOLVE_STATES: usize = 4096;
const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSpec {
    pub model: TreeModel,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSpec {
    pub alphabet: Alphabet,
    pub depth: usize,
    pub segments: Vec<SegmentSpec>,
    /// `x_{-D+1} ..= x_0` in time order.
    pub initial_context: Vec<Symbol>,
    pub seed: u64,
}

impl PiecewiseSpec {
    pub fn validate(&self) -> Result<()> {
        if self.initial_context.len() != self.depth {
            return Err(Error::InvalidParameter(format!(
                "initial context has {} symbols, depth is {}",
                self.initial_context.len(),
                self.depth
            )));
        }
        if self.segments.is_empty() || self.segments.iter().any(|s| s.length == 0) {
            return Err(Error::InvalidParameter("segments must be non-empty".into()));
        }
        for (j, s) in self.segments.iter().enumerate() {
            if s.model.m() != self.alphabet.size() || !s.model.has_params() {
                return Err(Error::MalformedModel(format!(
                    "segment {} lacks parameters for every leaf",
                    j + 1
                )));
            }
            if s.model.max_depth() > self.depth {
                return Err(Error::MalformedModel(format!(
                    "segment {} model is deeper than D = {}",
                    j + 1,
                    self.depth
                )));
            }
        }
        Ok(())
    }

    pub fn total_length(&self) -> usize {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Change-points implied by the segment lengths: segment `j + 1` starts at
    /// `p_j = 1 + sum_{k<=j} length_k`.
    pub fn change_points(&self) -> Vec<usize> {
        self.segments
            .iter()
            .take(self.segments.len() - 1)
            .scan(1, |start, s| {
                *start += s.length;
                Some(*start)
            })
            .collect()
    }
}

/// Draw the next symbol. `history` is in time order; its tail is the context.
pub fn sample_next<R: Rng + ?Sized>(model: &TreeModel, history: &[Symbol], rng: &mut R) -> Result<Symbol> {
    let leaf = model
        .find_leaf(history.iter().rev().copied())
        .ok_or_else(|| Error::MalformedModel("context shorter than the model depth".into()))?;
    let theta = model
        .params(leaf)
        .ok_or_else(|| Error::MalformedModel(format!("leaf {leaf:?} has no parameters")))?;
    Ok(draw(theta, rng))
}

fn draw<R: Rng + ?Sized>(theta: &[f64], rng: &mut R) -> Symbol {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (j, &p) in theta.iter().enumerate() {
        acc += p;
        if u < acc {
            return j as Symbol;
        }
    }
    // rounding: fall back to the last symbol with positive mass
    theta.iter().rposition(|&p| p > 0.0).unwrap_or(theta.len() - 1) as Symbol
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub sequence: Sequence,
    pub change_points: ChangePoints,
}

/// Emit each segment in turn, each continuing from the previous one's tail.
pub fn generate_piecewise(spec: &PiecewiseSpec) -> Result<Generated> {
    spec.validate()?;
    let mut rng = ChainRng::seed_from_u64(spec.seed);
    let mut data = spec.initial_context.clone();
    data.reserve(spec.total_length());
    for seg in &spec.segments {
        for _ in 0..seg.length {
            let s = sample_next(&seg.model, &data, &mut rng)?;
            data.push(s);
        }
    }
    let n = spec.total_length();
    let sequence = Sequence::new(spec.alphabet.clone(), &data[..spec.depth], &data[spec.depth..])?;
    let change_points = ChangePoints::new(n, spec.change_points())?;
    Ok(Generated {
        sequence,
        change_points,
    })
}

/// First-order marginal of the stationary law of the chain defined by `model`.
///
/// States are the last `d` symbols, `d` the model depth; the kernel must have
/// exactly one closed class.
pub fn stationary_marginal(model: &TreeModel) -> Result<Vec<f64>> {
    let m = model.m();
    let d = model.max_depth();
    if !model.has_params() {
        return Err(Error::MalformedModel(
            "stationary analysis needs leaf parameters".into(),
        ));
    }
    if d == 0 {
        return Ok(model.params(&[]).expect("root leaf").to_vec());
    }
    let states = (m as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if states > MAX_STATES {
        return Err(Error::StateSpaceTooLarge {
            states,
            cap: MAX_STATES,
        });
    }
    let kernel = ContextKernel::new(model, states as usize)?;
    kernel.check_unique_closed_class()?;
    let pi = match kernel.power_iteration() {
        Some(pi) => pi,
        None if kernel.states <= DIRECT_SOLVE_STATES => kernel.direct_solve()?,
        None => {
            return Err(Error::NoUniqueStationary(format!(
                "power iteration did not converge in {POWER_MAX_ITERS} steps"
            )))
        }
    };
    Ok(kernel.marginal(&pi))
}

/// Transition kernel on context states. State index `sum_k s_k m^k` with
/// `s_0` the most recent symbol.
pub(crate) struct ContextKernel {
    m: usize,
    states: usize,
    /// `probs[state * m + y]`: probability that `y` follows `state`.
    probs: Vec<f64>,
}

impl ContextKernel {
    fn new(model: &TreeModel, states: usize) -> Result<Self> {
        let m = model.m();
        let d = model.max_depth();
        let mut probs = Vec::with_capacity(states * m);
        let mut ctx = vec![0 as Symbol; d];
        for idx in 0..states {
            let mut rest = idx;
            for c in ctx.iter_mut() {
                *c = (rest % m) as Symbol;
                rest /= m;
            }
            let leaf = model
                .find_leaf(ctx.iter().copied())
                .ok_or_else(|| Error::MalformedModel("context walk ended before a leaf".into()))?;
            probs.extend_from_slice(model.params(leaf).expect("checked has_params"));
        }
        Ok(Self { m, states, probs })
    }

    #[inline]
    fn next(&self, state: usize, y: usize) -> usize {
        y + self.m * (state % (self.states / self.m))
    }

    fn check_unique_closed_class(&self) -> Result<()> {
        let mut g = DiGraph::<(), ()>::with_capacity(self.states, self.states * self.m);
        let nodes: Vec<_> = (0..self.states).map(|_| g.add_node(())).collect();
        for s in 0..self.states {
            for y in 0..self.m {
                if self.probs[s * self.m + y] > 0.0 {
                    g.add_edge(nodes[s], nodes[self.next(s, y)], ());
                }
            }
        }
        let sccs = tarjan_scc(&g);
        let mut comp = vec![0usize; self.states];
        for (c, scc) in sccs.iter().enumerate() {
            for v in scc {
                comp[v.index()] = c;
            }
        }
        let closed = sccs
            .iter()
            .enumerate()
            .filter(|(c, scc)| {
                scc.iter().all(|v| {
                    let s = v.index();
                    (0..self.m).all(|y| self.probs[s * self.m + y] == 0.0 || comp[self.next(s, y)] == *c)
                })
            })
            .count();
        if closed != 1 {
            return Err(Error::NoUniqueStationary(format!("{closed} closed classes")));
        }
        Ok(())
    }

    /// Iterate the lazy kernel `(I + P) / 2`, which has the same stationary
    /// law and is aperiodic.
    fn power_iteration(&self) -> Option<Vec<f64>> {
        let mut pi = vec![1.0 / self.states as f64; self.states];
        let mut next = vec![0.0; self.states];
        for _ in 0..POWER_MAX_ITERS {
            self.apply(&pi, &mut next);
            let mut delta: f64 = 0.0;
            for (a, b) in next.iter_mut().zip(&pi) {
                *a = 0.5 * (*a + b);
                delta = delta.max((*a - b).abs());
            }
            std::mem::swap(&mut pi, &mut next);
            if delta <= POWER_TOL {
                let z: f64 = pi.iter().sum();
                pi.iter_mut().for_each(|x| *x /= z);
                return Some(pi);
            }
        }
        None
    }

    /// `out = pi P`.
    pub(crate) fn apply(&self, pi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for (s, &w) in pi.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for y in 0..self.m {
                out[self.next(s, y)] += w * self.probs[s * self.m + y];
            }
        }
    }

    /// Solve `pi (P - I) = 0`, `sum pi = 1` by Gaussian elimination.
    fn direct_solve(&self) -> Result<Vec<f64>> {
        let k = self.states;
        // rows: equations; a[i][j] = P[j][i] - delta_ij, last row replaced by ones
        let mut a = vec![0.0; k * (k + 1)];
        let w = k + 1;
        for s in 0..k {
            for y in 0..self.m {
                a[self.next(s, y) * w + s] += self.probs[s * self.m + y];
            }
            a[s * w + s] -= 1.0;
        }
        for j in 0..k {
            a[(k - 1) * w + j] = 1.0;
        }
        a[(k - 1) * w + k] = 1.0;
        for col in 0..k {
            let piv = (col..k)
                .max_by(|&i, &j| a[i * w + col].abs().total_cmp(&a[j * w + col].abs()))
                .expect("non-empty range");
            if a[piv * w + col].abs() < 1e-14 {
                return Err(Error::NoUniqueStationary("singular stationary system".into()));
            }
            if piv != col {
                for j in 0..w {
                    a.swap(piv * w + j, col * w + j);
                }
            }
            let d = a[col * w + col];
            for j in col..w {
                a[col * w + j] /= d;
            }
            for i in 0..k {
                if i != col {
                    let f = a[i * w + col];
                    if f != 0.0 {
                        for j in col..w {
                            a[i * w + j] -= f * a[col * w + j];
                        }
                    }
                }
            }
        }
        Ok((0..k).map(|i| a[i * w + k].max(0.0)).collect())
    }

    fn marginal(&self, pi: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (s, &w) in pi.iter().enumerate() {
            out[s % self.m] += w;
        }
        out
    }
}

/// `‖pi P - pi‖_inf` on the context kernel of `model` for a state vector
/// `pi`, exposed for verification.
pub fn fixed_point_residual(model: &TreeModel, pi: &[f64]) -> Result<f64> {
    if model.max_depth() == 0 {
        return Ok((pi.iter().sum::<f64>() - 1.0).abs());
    }
    let states = (model.m() as u128).pow(model.max_depth() as u32) as usize;
    let kernel = ContextKernel::new(model, states)?;
    let mut out = vec![0.0; states];
    kernel.apply(pi, &mut out);
    Ok(out.iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Full stationary vector over context states (index `sum_k s_k m^k`, `s_0`
/// most recent).
pub fn stationary_states(model: &TreeModel) -> Result<Vec<f64>> {
    let d = model.max_depth();
    if d == 0 {
        return Ok(vec![1.0]);
    }
    let states = (model.m() as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if states > MAX_STATES {
        return Err(Error::StateSpaceTooLarge {
            states,
            cap: MAX_STATES,
        });
    }
    let kernel = ContextKernel::new(model, states as usize)?;
    kernel.check_unique_closed_class()?;
    match kernel.power_iteration() {
        Some(pi) => Ok(pi),
        None => kernel.direct_solve(),
    }
}

// ---------------------------------------------------------------------------
// JSON spec files
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphabetJson {
    Size(usize),
    Labels(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentJson {
    /// Leaf context (most recent symbol first, `""` or `"λ"` for the root)
    /// to next-symbol distribution.
    pub contexts: BTreeMap<String, Vec<f64>>,
    pub length: usize,
}

/// On-disk generator spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecJson {
    pub alphabet: AlphabetJson,
    #[serde(rename = "D")]
    pub depth: usize,
    pub segments: Vec<SegmentJson>,
    #[serde(default)]
    pub seed: u64,
    /// Initial context in time order as a label string; all-zeros by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_context: Option<String>,
}

impl SpecJson {
    pub fn to_spec(&self) -> Result<PiecewiseSpec> {
        let alphabet = match &self.alphabet {
            AlphabetJson::Size(m) => Alphabet::numeric(*m)?,
            AlphabetJson::Labels(l) => Alphabet::new(l.clone())?,
        };
        let segments = self
            .segments
            .iter()
            .map(|s| {
                let leaves = s
                    .contexts
                    .iter()
                    .map(|(c, p)| {
                        let ctx = if c == "λ" {
                            Vec::new()
                        } else {
                            alphabet.parse_string(c)?
                        };
                        Ok((ctx, p.clone()))
                    })
                    .collect::<Result<BTreeMap<_, _>>>()?;
                Ok(SegmentSpec {
                    model: TreeModel::with_params(alphabet.size(), leaves)?,
                    length: s.length,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let initial_context = match &self.initial_context {
            Some(c) => alphabet.parse_string(c)?,
            None => vec![0; self.depth],
        };
        let spec = PiecewiseSpec {
            alphabet,
            depth: self.depth,
            segments,
            initial_context,
            seed: self.seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &PiecewiseSpec) -> Self {
        let a = &spec.alphabet;
        Self {
            alphabet: AlphabetJson::Labels(a.labels().to_vec()),
            depth: spec.depth,
            segments: spec
                .segments
                .iter()
                .map(|s| SegmentJson {
                    contexts: s
                        .model
                        .leaves()
                        .map(|l| (a.render(l), s.model.params(l).unwrap_or_default().to_vec()))
                        .collect(),
                    length: s.length,
                })
                .collect(),
            seed: spec.seed,
            initial_context: Some(a.render(&spec.initial_context)),
        }
    }
}

/// Sidecar describing the true segmentation of a generated sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub n: usize,
    pub change_points: Vec<usize>,
    pub segment_lengths: Vec<usize>,
    pub seed: u64,
}

impl Truth {
    pub fn of(spec: &PiecewiseSpec) -> Self {
        Self {
            n: spec.total_length(),
            change_points: spec.change_points(),
            segment_lengths: spec.segments.iter().map(|s| s.length).collect(),
            seed: spec.seed,
        }
    }
}

/// Four ternary variable-memory chains of decreasing depth (4, 2, 1, 0) with
/// change-points at 2500, 3500 and 4000 in a series of length 4300.
pub fn ternary_benchmark_spec(seed: u64) -> PiecewiseSpec {
    const SPEC: &str = include_str!("../data/ternary_benchmark.json");
    let mut json: SpecJson = serde_json::from_str(SPEC).expect("bundled spec parses");
    json.seed = seed;
    json.to_spec().expect("bundled spec is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> TreeModel {
        let mut leaves = BTreeMap::new();
        leaves.insert(vec![0], vec![0.9, 0.1]);
        leaves.insert(vec![1], vec![0.5, 0.5]);
        TreeModel::with_params(2, leaves).unwrap()
    }

    fn iid(theta: Vec<f64>) -> TreeModel {
        let mut leaves = BTreeMap::new();
        let m = theta.len();
        leaves.insert(vec![], theta);
        TreeModel::with_params(m, leaves).unwrap()
    }

    #[test]
    fn empty_tree_ignores_context() {
        let model = iid(vec![0.0, 1.0, 0.0]);
        let mut rng = ChainRng::seed_from_u64(0);
        for h in [vec![], vec![0, 2, 1]] {
            assert_eq!(sample_next(&model, &h, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn walks_recent_symbols_first() {
        // leaves 0, 10, 11: 11 is deterministic
        let mut leaves = BTreeMap::new();
        leaves.insert(vec![0], vec![1.0, 0.0]);
        leaves.insert(vec![1, 0], vec![1.0, 0.0]);
        leaves.insert(vec![1, 1], vec![0.0, 1.0]);
        let model = TreeModel::with_params(2, leaves).unwrap();
        let mut rng = ChainRng::seed_from_u64(0);
        assert_eq!(sample_next(&model, &[1, 1, 1], &mut rng).unwrap(), 1);
        // previous symbol 1, the one before 0 → context 10
        assert_eq!(sample_next(&model, &[1, 0, 1], &mut rng).unwrap(), 0);
        assert!(sample_next(&model, &[1], &mut rng).is_err());
    }

    #[test]
    fn benchmark_model_three_context_two() {
        let spec = ternary_benchmark_spec(0);
        let model3 = &spec.segments[2].model;
        assert_eq!(model3.params(&[2]), Some(&[0.3, 0.2, 0.5][..]));
        assert_eq!(model3.find_leaf([2, 0, 1]), Some(&[2u8][..]));
        assert_eq!(spec.segments[0].model.max_depth(), 4);
        assert_eq!(spec.segments[3].model.leaf_count(), 1);
    }

    #[test]
    fn benchmark_lengths() {
        let spec = ternary_benchmark_spec(1);
        assert_eq!(spec.total_length(), 4300);
        assert_eq!(spec.change_points(), vec![2500, 3500, 4000]);
        let g = generate_piecewise(&spec).unwrap();
        assert_eq!(g.sequence.n(), 4300);
        assert_eq!(g.change_points.positions(), &[2500, 3500, 4000]);
        assert_eq!(g.sequence.context(), &[0; 10]);
        assert_eq!(generate_piecewise(&spec).unwrap(), g);
        let other = generate_piecewise(&ternary_benchmark_spec(2)).unwrap();
        assert_ne!(other.sequence, g.sequence);
    }

    #[test]
    fn iid_frequencies() {
        let theta = vec![0.4, 0.2, 0.4];
        let spec = PiecewiseSpec {
            alphabet: Alphabet::numeric(3).unwrap(),
            depth: 0,
            segments: vec![SegmentSpec {
                model: iid(theta.clone()),
                length: 100_000,
            }],
            initial_context: vec![],
            seed: 9,
        };
        let g = generate_piecewise(&spec).unwrap();
        let mut counts = [0usize; 3];
        for &s in g.sequence.observations() {
            counts[s as usize] += 1;
        }
        for (c, t) in counts.iter().zip(&theta) {
            assert!((*c as f64 / 1e5 - t).abs() < 0.02);
        }
    }

    #[test]
    fn stationary_examples() {
        let pi = stationary_marginal(&two_state()).unwrap();
        assert!((pi[1] - 1.0 / 6.0).abs() < 1e-9);
        assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        assert_eq!(stationary_marginal(&iid(vec![0.25, 0.75])).unwrap(), vec![0.25, 0.75]);
    }

    #[test]
    fn stationary_is_fixed_point() {
        for seg in ternary_benchmark_spec(0).segments {
            let pi = stationary_states(&seg.model).unwrap();
            assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(fixed_point_residual(&seg.model, &pi).unwrap() <= 1e-9);
            let marg = stationary_marginal(&seg.model).unwrap();
            assert!((marg.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn periodic_chain_still_has_unique_law() {
        // deterministic alternation 0101...
        let mut leaves = BTreeMap::new();
        leaves.insert(vec![0], vec![0.0, 1.0]);
        leaves.insert(vec![1], vec![1.0, 0.0]);
        let model = TreeModel::with_params(2, leaves).unwrap();
        let pi = stationary_marginal(&model).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn reducible_chain_is_rejected() {
        // both states absorbing
        let mut leaves = BTreeMap::new();
        leaves.insert(vec![0], vec![1.0, 0.0]);
        leaves.insert(vec![1], vec![0.0, 1.0]);
        let model = TreeModel::with_params(2, leaves).unwrap();
        assert!(matches!(stationary_marginal(&model), Err(Error::NoUniqueStationary(_))));
    }

    #[test]
    fn direct_solve_agrees_with_power_iteration() {
        let spec = ternary_benchmark_spec(0);
        let model = &spec.segments[0].model;
        let states = 3usize.pow(4);
        let k = ContextKernel::new(model, states).unwrap();
        let a = k.power_iteration().unwrap();
        let b = k.direct_solve().unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn state_space_cap() {
        let mut leaves = BTreeMap::new();
        let deep: Vec<u8> = vec![0; 21];
        // chain of zeros to depth 21 with siblings as leaves
        for d in 0..21 {
            let mut sib = deep[..d].to_vec();
            sib.push(1);
            leaves.insert(sib, vec![0.5, 0.5]);
        }
        leaves.insert(deep, vec![0.5, 0.5]);
        let model = TreeModel::with_params(2, leaves).unwrap();
        assert!(matches!(
            stationary_marginal(&model),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = ternary_benchmark_spec(5);
        let json = SpecJson::from_spec(&spec);
        let text = serde_json::to_string(&json).unwrap();
        let back: SpecJson = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_spec().unwrap(), spec);
    }
}
