//! Bayesian context trees: counts, KT estimates, evidence and MAP models.
//!
//! Contexts are stored most-recent-symbol-first: the context `[1, 0]` means
//! the previous symbol was 1 and the one before it 0. A node's children extend
//! its context one step further into the past.

mod brute;
mod counts;
mod kt;
mod params;
mod tree;

pub use brute::{brute_force_evidence, brute_force_map, enumerate_trees, model_class_size, DEFAULT_ENUMERATION_LIMIT};
pub use counts::{CountTree, Ctw, NodeView};
pub use kt::{kt_log_prob, leaf_posterior_mean, KtTable};
pub use params::BctParams;
pub use tree::{TreeModel, TreeModelJson};

use crate::sequence::Sequence;
use crate::Result;

/// Count tree of `seq` for the configured depth.
pub fn build_counts(seq: &Sequence, params: &BctParams) -> Result<CountTree> {
    params.check_sequence(seq)?;
    let mut ctw = Ctw::new(*params);
    ctw.rebuild(seq.data(), true);
    Ok(ctw.into_tree())
}

/// `ln P*_D(x)`: evidence with all models in `T(D)` and their parameters
/// integrated out.
pub fn ctw_log_evidence(seq: &Sequence, params: &BctParams) -> Result<f64> {
    params.check_sequence(seq)?;
    Ok(Ctw::new(*params).log_evidence(seq.data()))
}

/// MAP tree of `seq` with posterior-mean parameters attached to every leaf.
pub fn map_tree(seq: &Sequence, params: &BctParams) -> Result<TreeModel> {
    Ok(build_counts(seq, params)?.map_tree())
}
