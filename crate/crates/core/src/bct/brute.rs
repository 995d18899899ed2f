//! Exhaustive enumeration over `T(D)`, used as an oracle for the recursions.

use std::collections::HashMap;

use super::{kt_log_prob, BctParams, TreeModel};
use crate::logmath::log_sum_exp;
use crate::sequence::Sequence;
use crate::{Error, Result, Symbol};

pub const DEFAULT_ENUMERATION_LIMIT: u128 = 200_000;

/// `|T(D)|` via `|T(0)| = 1`, `|T(d+1)| = |T(d)|^m + 1` (saturating).
pub fn model_class_size(m: usize, depth: usize) -> u128 {
    (0..depth).fold(1u128, |size, _| {
        size.checked_pow(m as u32)
            .and_then(|s| s.checked_add(1))
            .unwrap_or(u128::MAX)
    })
}

/// All proper m-ary trees of depth at most `depth`.
pub fn enumerate_trees(m: usize, depth: usize, limit: u128) -> Result<Vec<TreeModel>> {
    let count = model_class_size(m, depth);
    if count > limit {
        return Err(Error::ModelClassTooLarge { count, limit });
    }
    leaf_sets(m, depth)
        .into_iter()
        .map(|leaves| TreeModel::new(m, leaves))
        .collect()
}

fn leaf_sets(m: usize, depth: usize) -> Vec<Vec<Vec<Symbol>>> {
    let mut out = vec![vec![Vec::new()]];
    if depth == 0 {
        return out;
    }
    let sub = leaf_sets(m, depth - 1);
    // cartesian product over the m children
    let mut combos: Vec<Vec<Vec<Symbol>>> = vec![Vec::new()];
    for j in 0..m {
        let mut next = Vec::with_capacity(combos.len() * sub.len());
        for partial in &combos {
            for child in &sub {
                let mut leaves = partial.clone();
                leaves.extend(child.iter().map(|l| {
                    let mut c = vec![j as Symbol];
                    c.extend_from_slice(l);
                    c
                }));
                next.push(leaves);
            }
        }
        combos = next;
    }
    out.extend(combos);
    out
}

/// Leaf counts by walking each observation's context down `tree`.
fn leaf_counts(tree: &TreeModel, seq: &Sequence) -> HashMap<Vec<Symbol>, Vec<u32>> {
    let m = tree.m();
    let data = seq.data();
    let mut out: HashMap<Vec<Symbol>, Vec<u32>> = HashMap::new();
    for pos in seq.depth()..data.len() {
        let leaf = tree
            .find_leaf(data[..pos].iter().rev().copied())
            .expect("context deeper than the tree");
        out.entry(leaf.to_vec()).or_insert_with(|| vec![0; m])[data[pos] as usize] += 1;
    }
    out
}

/// `ln pi(T) + sum_leaves ln Pe(a_s)` for one tree.
fn log_score(tree: &TreeModel, seq: &Sequence, params: &BctParams) -> f64 {
    let ll: f64 = leaf_counts(tree, seq).values().map(|c| kt_log_prob(c)).sum();
    tree.log_prior(params) + ll
}

/// `ln P*_D(x)` by summing over every tree in `T(D)`.
pub fn brute_force_evidence(seq: &Sequence, params: &BctParams) -> Result<f64> {
    params.check_sequence(seq)?;
    let trees = enumerate_trees(params.m(), params.depth(), DEFAULT_ENUMERATION_LIMIT)?;
    let scores: Vec<f64> = trees.iter().map(|t| log_score(t, seq, params)).collect();
    Ok(log_sum_exp(&scores))
}

/// The highest-scoring tree by enumeration and its log score. Ties keep the
/// tree with fewer leaves.
pub fn brute_force_map(seq: &Sequence, params: &BctParams) -> Result<(TreeModel, f64)> {
    params.check_sequence(seq)?;
    let trees = enumerate_trees(params.m(), params.depth(), DEFAULT_ENUMERATION_LIMIT)?;
    let mut best: Option<(TreeModel, f64)> = None;
    for t in trees {
        let s = log_score(&t, seq, params);
        let better = match &best {
            None => true,
            Some((bt, bs)) => s > *bs || (s == *bs && t.leaf_count() < bt.leaf_count()),
        };
        if better {
            best = Some((t, s));
        }
    }
    Ok(best.expect("T(D) is never empty"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_sizes() {
        assert_eq!(model_class_size(2, 0), 1);
        assert_eq!(model_class_size(2, 1), 2);
        assert_eq!(model_class_size(2, 2), 5);
        assert_eq!(model_class_size(2, 3), 26);
        assert_eq!(model_class_size(2, 4), 677);
        assert_eq!(model_class_size(3, 2), 9);
        for (m, d) in [(2, 0), (2, 1), (2, 2), (2, 3), (2, 4), (3, 1), (3, 2)] {
            assert_eq!(
                enumerate_trees(m, d, u128::MAX).unwrap().len() as u128,
                model_class_size(m, d)
            );
        }
    }

    #[test]
    fn guard_on_large_classes() {
        assert!(matches!(
            enumerate_trees(2, 6, DEFAULT_ENUMERATION_LIMIT),
            Err(Error::ModelClassTooLarge { .. })
        ));
    }

    #[test]
    fn priors_sum_to_one() {
        for (m, d, beta) in [(2, 1, 0.5), (2, 2, 0.3), (2, 3, 0.5), (2, 3, 0.81), (3, 2, 0.75)] {
            let p = BctParams::new(m, d, Some(beta)).unwrap();
            let lp: Vec<f64> = enumerate_trees(m, d, u128::MAX)
                .unwrap()
                .iter()
                .map(|t| t.log_prior(&p))
                .collect();
            assert!(log_sum_exp(&lp).abs() < 1e-12, "m={m} d={d}");
        }
    }
}
