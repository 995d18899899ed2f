//! Count tree and the weighting / maximizing recursions.
//!
//! ```text
//! Pw_s = Pe_s                                     depth(s) = D
//! Pw_s = beta Pe_s + (1 - beta) prod_j Pw_js      depth(s) < D
//! Pm_s = max(beta Pe_s, (1 - beta) prod_j Pm_js)  (same base case)
//! ```
//!
//! Nodes only exist for contexts seen in the data. A missing child has zero
//! counts, so its weighted probability is exactly 1; its maximized probability
//! depends only on its depth and comes from [`Ctw::empty_pm`].

use std::collections::BTreeMap;

use super::{leaf_posterior_mean, BctParams, KtTable, TreeModel};
use crate::logmath::log_add_exp;
use crate::Symbol;

const NONE: u32 = u32::MAX;

/// Per-context counts with cached `ln Pe`, `ln Pw` and `ln Pm`.
///
/// Immutable once built; node 0 is the root.
#[derive(Debug, Clone)]
pub struct CountTree {
    params: BctParams,
    counts: Vec<u32>,
    children: Vec<u32>,
    parent: Vec<u32>,
    edge: Vec<Symbol>,
    node_depth: Vec<u16>,
    log_pe: Vec<f64>,
    log_pw: Vec<f64>,
    log_pm: Vec<f64>,
    split: Vec<bool>,
    empty_pm: Vec<f64>,
    empty_split: Vec<bool>,
    has_map: bool,
}

/// Read-only view of one count-tree node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeView<'a> {
    pub context: Vec<Symbol>,
    pub depth: usize,
    pub counts: &'a [u32],
    pub log_pe: f64,
    pub log_pw: f64,
    /// `NaN` when the tree was built without the maximizing pass.
    pub log_pm: f64,
}

impl CountTree {
    fn empty(params: BctParams) -> Self {
        Self {
            params,
            counts: Vec::new(),
            children: Vec::new(),
            parent: Vec::new(),
            edge: Vec::new(),
            node_depth: Vec::new(),
            log_pe: Vec::new(),
            log_pw: Vec::new(),
            log_pm: Vec::new(),
            split: Vec::new(),
            empty_pm: Vec::new(),
            empty_split: Vec::new(),
            has_map: false,
        }
    }

    pub fn params(&self) -> &BctParams {
        &self.params
    }

    pub fn node_count(&self) -> usize {
        self.node_depth.len()
    }

    /// `ln P*_D` of the data the tree was built from.
    pub fn log_evidence(&self) -> f64 {
        self.log_pw[0]
    }

    /// `ln max_T pi(T) prod_{s in T} Pe_s`.
    pub fn log_map_score(&self) -> f64 {
        assert!(self.has_map, "count tree built without the maximizing pass");
        self.log_pm[0]
    }

    pub fn root_counts(&self) -> &[u32] {
        self.counts_of(0)
    }

    fn counts_of(&self, node: usize) -> &[u32] {
        let m = self.params.m();
        &self.counts[node * m..(node + 1) * m]
    }

    fn child(&self, node: usize, sym: usize) -> Option<usize> {
        let c = self.children[node * self.params.m() + sym];
        (c != NONE).then_some(c as usize)
    }

    fn find(&self, context: &[Symbol]) -> Option<usize> {
        context.iter().try_fold(0usize, |node, &s| self.child(node, s as usize))
    }

    fn context_of(&self, mut node: usize) -> Vec<Symbol> {
        let mut ctx = Vec::with_capacity(self.node_depth[node] as usize);
        while node != 0 {
            ctx.push(self.edge[node]);
            node = self.parent[node] as usize;
        }
        ctx.reverse();
        ctx
    }

    fn view(&self, node: usize) -> NodeView<'_> {
        NodeView {
            context: self.context_of(node),
            depth: self.node_depth[node] as usize,
            counts: self.counts_of(node),
            log_pe: self.log_pe[node],
            log_pw: self.log_pw[node],
            log_pm: if self.has_map { self.log_pm[node] } else { f64::NAN },
        }
    }

    /// The node for `context` (most recent symbol first), if it occurs.
    pub fn node(&self, context: &[Symbol]) -> Option<NodeView<'_>> {
        self.find(context).map(|n| self.view(n))
    }

    /// Counts following `context`; zeros when the context never occurs.
    pub fn counts(&self, context: &[Symbol]) -> Vec<u32> {
        match self.find(context) {
            Some(n) => self.counts_of(n).to_vec(),
            None => vec![0; self.params.m()],
        }
    }

    /// All nodes in creation order (parents before children).
    pub fn nodes(&self) -> impl Iterator<Item = NodeView<'_>> + '_ {
        (0..self.node_count()).map(|n| self.view(n))
    }

    /// MAP tree with posterior-mean parameters on every leaf.
    ///
    /// A node is internal only when splitting strictly beats stopping, so ties
    /// resolve to the smaller model.
    pub fn map_tree(&self) -> TreeModel {
        assert!(self.has_map, "count tree built without the maximizing pass");
        let mut leaves = BTreeMap::new();
        let mut ctx = Vec::new();
        self.collect_map(Some(0), 0, &mut ctx, &mut leaves);
        TreeModel::with_params(self.params.m(), leaves).expect("MAP tree is proper")
    }

    fn collect_map(
        &self,
        node: Option<usize>,
        depth: usize,
        ctx: &mut Vec<Symbol>,
        leaves: &mut BTreeMap<Vec<Symbol>, Vec<f64>>,
    ) {
        let split = match node {
            Some(n) => self.split[n],
            None => self.empty_split[depth],
        };
        if !split {
            let counts = node
                .map(|n| self.counts_of(n).to_vec())
                .unwrap_or_else(|| vec![0; self.params.m()]);
            leaves.insert(ctx.clone(), leaf_posterior_mean(&counts));
            return;
        }
        for j in 0..self.params.m() {
            let child = node.and_then(|n| self.child(n, j));
            ctx.push(j as Symbol);
            self.collect_map(child, depth + 1, ctx, leaves);
            ctx.pop();
        }
    }
}

/// Reusable CTW workspace: a count tree plus KT tables, rebuilt per window.
#[derive(Debug, Clone)]
pub struct Ctw {
    tree: CountTree,
    kt: KtTable,
}

impl Ctw {
    pub fn new(params: BctParams) -> Self {
        let mut tree = CountTree::empty(params);
        let (pm, split) = empty_subtree_table(&params);
        tree.empty_pm = pm;
        tree.empty_split = split;
        Self {
            tree,
            kt: KtTable::new(params.m()),
        }
    }

    pub fn params(&self) -> &BctParams {
        &self.tree.params
    }

    /// `ln Pm` of an unseen subtree rooted at `depth`.
    pub fn empty_pm(&self, depth: usize) -> f64 {
        self.tree.empty_pm[depth]
    }

    /// `ln P*_D` of `window`, whose first `D` symbols are the initial context.
    pub fn log_evidence(&mut self, window: &[Symbol]) -> f64 {
        self.rebuild(window, false);
        self.tree.log_evidence()
    }

    pub fn tree(&self) -> &CountTree {
        &self.tree
    }

    pub fn into_tree(self) -> CountTree {
        self.tree
    }

    /// Rebuild the count tree for `window` (context then observations) and run
    /// the weighting pass, plus the maximizing pass when `with_map` is set.
    pub fn rebuild(&mut self, window: &[Symbol], with_map: bool) {
        let t = &mut self.tree;
        let m = t.params.m();
        let depth = t.params.depth();
        assert!(window.len() >= depth, "window shorter than the context depth");
        let n = window.len() - depth;

        t.counts.clear();
        t.children.clear();
        t.parent.clear();
        t.edge.clear();
        t.node_depth.clear();
        t.counts.resize(m, 0);
        t.children.resize(m, NONE);
        t.parent.push(NONE);
        t.edge.push(0);
        t.node_depth.push(0);

        for i in depth..window.len() {
            let sym = window[i] as usize;
            let mut node = 0usize;
            t.counts[sym] += 1;
            for d in 1..=depth {
                let c = window[i - d] as usize;
                let slot = node * m + c;
                let mut next = t.children[slot];
                if next == NONE {
                    next = t.node_depth.len() as u32;
                    t.children[slot] = next;
                    t.counts.extend(std::iter::repeat_n(0, m));
                    t.children.extend(std::iter::repeat_n(NONE, m));
                    t.parent.push(node as u32);
                    t.edge.push(c as Symbol);
                    t.node_depth.push(d as u16);
                }
                node = next as usize;
                t.counts[node * m + sym] += 1;
            }
        }

        self.kt.reserve(n);
        let nodes = t.node_depth.len();
        t.log_pe.clear();
        t.log_pe
            .extend((0..nodes).map(|k| self.kt.log_pe(&t.counts[k * m..(k + 1) * m])));

        let ln_beta = t.params.ln_beta();
        let ln_split = t.params.ln_split();
        t.log_pw.clear();
        t.log_pw.resize(nodes, 0.0);
        t.has_map = with_map;
        if with_map {
            t.log_pm.clear();
            t.log_pm.resize(nodes, 0.0);
            t.split.clear();
            t.split.resize(nodes, false);
        }
        // children always have larger indices than their parent
        for k in (0..nodes).rev() {
            let d = t.node_depth[k] as usize;
            if d == depth {
                t.log_pw[k] = t.log_pe[k];
                if with_map {
                    t.log_pm[k] = t.log_pe[k];
                }
                continue;
            }
            let mut prod_w = 0.0;
            let mut prod_m = 0.0;
            for j in 0..m {
                match t.children[k * m + j] {
                    NONE => prod_m += t.empty_pm[d + 1],
                    c => {
                        prod_w += t.log_pw[c as usize];
                        if with_map {
                            prod_m += t.log_pm[c as usize];
                        }
                    }
                }
            }
            t.log_pw[k] = log_add_exp(ln_beta + t.log_pe[k], ln_split + prod_w);
            if with_map {
                let stop = ln_beta + t.log_pe[k];
                let go = ln_split + prod_m;
                t.split[k] = go > stop;
                t.log_pm[k] = if go > stop { go } else { stop };
            }
        }
    }
}

/// `ln Pm` and the split decision for an unseen subtree at each depth.
fn empty_subtree_table(params: &BctParams) -> (Vec<f64>, Vec<bool>) {
    let depth = params.depth();
    let mut pm = vec![0.0; depth + 1];
    let mut split = vec![false; depth + 1];
    for d in (0..depth).rev() {
        let stop = params.ln_beta();
        let go = params.ln_split() + params.m() as f64 * pm[d + 1];
        split[d] = go > stop;
        pm[d] = stop.max(go);
    }
    (pm, split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bct::{build_counts, kt_log_prob};
    use crate::sequence::{Alphabet, Sequence};
    use proptest::prelude::*;

    fn seq(m: usize, ctx: &[u8], obs: &[u8]) -> Sequence {
        Sequence::new(Alphabet::numeric(m).unwrap(), ctx, obs).unwrap()
    }

    /// Counts by direct enumeration over all (i, d) pairs.
    fn brute_counts(s: &Sequence, depth: usize) -> BTreeMap<Vec<u8>, Vec<u32>> {
        let m = s.alphabet().size();
        let mut out: BTreeMap<Vec<u8>, Vec<u32>> = BTreeMap::new();
        for i in 1..=s.n() {
            let pos = s.depth() + i - 1;
            for d in 0..=depth {
                let ctx: Vec<u8> = (1..=d).map(|k| s.data()[pos - k]).collect();
                out.entry(ctx).or_insert_with(|| vec![0; m])[s.data()[pos] as usize] += 1;
            }
        }
        out
    }

    #[test]
    fn single_transition() {
        let s = seq(2, &[0], &[1]);
        let t = build_counts(&s, &BctParams::new(2, 1, None).unwrap()).unwrap();
        assert_eq!(t.root_counts(), &[0, 1]);
        assert_eq!(t.counts(&[0]), vec![0, 1]);
        assert_eq!(t.counts(&[1]), vec![0, 0]);
    }

    #[test]
    fn short_binary_example() {
        // context x_0 = 1, observations 0 1 0: transitions 1->0, 0->1, 1->0
        let s = seq(2, &[1], &[0, 1, 0]);
        let t = build_counts(&s, &BctParams::new(2, 1, None).unwrap()).unwrap();
        let expected = brute_counts(&s, 1);
        assert_eq!(expected[&vec![]], vec![2, 1]);
        assert_eq!(expected[&vec![1]], vec![2, 0]);
        assert_eq!(expected[&vec![0]], vec![0, 1]);
        for (ctx, c) in expected {
            assert_eq!(t.counts(&ctx), c);
        }
    }

    #[test]
    fn depth_zero_is_kt_of_root() {
        let s = seq(3, &[], &[0, 1, 2, 2, 1, 0, 0]);
        let p = BctParams::new(3, 0, None).unwrap();
        let t = build_counts(&s, &p).unwrap();
        assert_eq!(t.node_count(), 1);
        assert!((t.log_evidence() - kt_log_prob(&[3, 2, 2])).abs() < 1e-12);
    }

    #[test]
    fn empty_subtree_table_shapes() {
        let p = BctParams::new(2, 3, Some(0.5)).unwrap();
        let (pm, split) = empty_subtree_table(&p);
        assert_eq!(pm[3], 0.0);
        // depth 2: max(1/2, 1/2 * 1) ties, so stop
        assert!((pm[2] - 0.5f64.ln()).abs() < 1e-15);
        assert!(!split[2]);
        assert!(split.iter().all(|s| !s));
        // small beta favours splitting near the bottom
        let p = BctParams::new(2, 3, Some(0.1)).unwrap();
        let (_, split) = empty_subtree_table(&p);
        assert!(split[2]);
    }

    proptest! {
        #[test]
        fn counts_match_enumeration(
            ctx in proptest::collection::vec(0u8..3, 3),
            obs in proptest::collection::vec(0u8..3, 1..40),
        ) {
            let s = seq(3, &ctx, &obs);
            let t = build_counts(&s, &BctParams::new(3, 3, None).unwrap()).unwrap();
            let expected = brute_counts(&s, 3);
            prop_assert_eq!(t.node_count(), expected.len());
            for (c, v) in &expected {
                prop_assert_eq!(&t.counts(c), v);
            }
        }

        #[test]
        fn child_counts_partition_parent(
            ctx in proptest::collection::vec(0u8..2, 4),
            obs in proptest::collection::vec(0u8..2, 1..80),
        ) {
            let s = seq(2, &ctx, &obs);
            let t = build_counts(&s, &BctParams::new(2, 4, None).unwrap()).unwrap();
            prop_assert_eq!(t.root_counts().iter().sum::<u32>() as usize, s.n());
            for node in t.nodes().filter(|v| v.depth < 4) {
                let mut sum = [0u32; 2];
                for j in 0..2u8 {
                    let mut c = node.context.clone();
                    c.push(j);
                    for (k, v) in t.counts(&c).iter().enumerate() {
                        sum[k] += v;
                    }
                }
                prop_assert_eq!(&sum[..], node.counts);
            }
        }

        #[test]
        fn mixture_dominates_first_term(
            obs in proptest::collection::vec(0u8..2, 1..60),
            beta in 0.01f64..0.99,
        ) {
            let s = seq(2, &[0, 1, 1], &obs);
            let p = BctParams::new(2, 3, Some(beta)).unwrap();
            let t = build_counts(&s, &p).unwrap();
            for v in t.nodes() {
                let first = if v.depth == 3 { v.log_pe } else { beta.ln() + v.log_pe };
                prop_assert!(v.log_pw >= first - 1e-12);
                prop_assert!(v.log_pw <= 1e-12);
            }
        }
    }
}
