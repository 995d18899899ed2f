//! Proper m-ary context-tree models.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::BctParams;
use crate::sequence::Alphabet;
use crate::{Error, Result, Symbol};

/// A proper m-ary tree given by its leaf contexts, optionally with a
/// next-symbol distribution on every leaf.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    m: usize,
    leaves: BTreeMap<Vec<Symbol>, Option<Vec<f64>>>,
    internal: BTreeSet<Vec<Symbol>>,
}

impl TreeModel {
    /// The empty tree `{λ}`.
    pub fn root(m: usize) -> Self {
        Self::new(m, [Vec::new()]).expect("root tree is proper")
    }

    pub fn new(m: usize, leaves: impl IntoIterator<Item = Vec<Symbol>>) -> Result<Self> {
        Self::build(m, leaves.into_iter().map(|l| (l, None)).collect())
    }

    pub fn with_params(m: usize, leaves: BTreeMap<Vec<Symbol>, Vec<f64>>) -> Result<Self> {
        Self::build(m, leaves.into_iter().map(|(l, p)| (l, Some(p))).collect())
    }

    fn build(m: usize, leaves: BTreeMap<Vec<Symbol>, Option<Vec<f64>>>) -> Result<Self> {
        if leaves.is_empty() {
            return Err(Error::MalformedModel("no leaves".into()));
        }
        let mut internal = BTreeSet::new();
        for leaf in leaves.keys() {
            if let Some(&s) = leaf.iter().find(|&&s| s as usize >= m) {
                return Err(Error::MalformedModel(format!(
                    "symbol {s} outside alphabet of size {m}"
                )));
            }
            for k in 0..leaf.len() {
                internal.insert(leaf[..k].to_vec());
            }
        }
        if let Some(leaf) = leaves.keys().find(|l| internal.contains(*l)) {
            return Err(Error::MalformedModel(format!("leaf {leaf:?} has descendants")));
        }
        for node in &internal {
            for j in 0..m {
                let mut child = node.clone();
                child.push(j as Symbol);
                if !leaves.contains_key(&child) && !internal.contains(&child) {
                    return Err(Error::MalformedModel(format!("node {node:?} is missing child {j}")));
                }
            }
        }
        for (leaf, p) in &leaves {
            if let Some(p) = p {
                let sum: f64 = p.iter().sum();
                if p.len() != m || p.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::MalformedModel(format!(
                        "parameters of leaf {leaf:?} are not a distribution over {m} symbols"
                    )));
                }
            }
        }
        Ok(Self { m, leaves, internal })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn leaves(&self) -> impl Iterator<Item = &[Symbol]> + '_ {
        self.leaves.keys().map(Vec::as_slice)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = &[Symbol]> + '_ {
        self.internal.iter().map(Vec::as_slice)
    }

    /// Every node, internal and leaf, in lexicographic context order.
    pub fn contexts(&self) -> Vec<&[Symbol]> {
        let mut all: Vec<&[Symbol]> = self.internal_nodes().chain(self.leaves()).collect();
        all.sort();
        all
    }

    pub fn max_depth(&self) -> usize {
        self.leaves.keys().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_params(&self) -> bool {
        self.leaves.values().all(Option::is_some)
    }

    pub fn params(&self, leaf: &[Symbol]) -> Option<&[f64]> {
        self.leaves.get(leaf).and_then(|p| p.as_deref())
    }

    /// `ln pi(T) = (|T| - 1) ln alpha + (|T| - L_D(T)) ln beta`.
    pub fn log_prior(&self, params: &BctParams) -> f64 {
        let leaves = self.leaf_count() as f64;
        let at_depth = self.leaves.keys().filter(|l| l.len() == params.depth()).count() as f64;
        let ln_alpha = params.ln_split() / (params.m() as f64 - 1.0);
        (leaves - 1.0) * ln_alpha + (leaves - at_depth) * params.ln_beta()
    }

    /// Leaf matching a context given most-recent-symbol-first. `None` if the
    /// context runs out before a leaf is reached.
    pub fn find_leaf<I>(&self, recent_first: I) -> Option<&[Symbol]>
    where
        I: IntoIterator<Item = Symbol>,
    {
        let mut path = Vec::new();
        let mut it = recent_first.into_iter();
        loop {
            if let Some((k, _)) = self.leaves.get_key_value(&path) {
                return Some(k.as_slice());
            }
            path.push(it.next()?);
        }
    }

    pub fn to_json(&self, alphabet: &Alphabet) -> TreeModelJson {
        TreeModelJson {
            contexts: self.contexts().into_iter().map(|c| alphabet.render(c)).collect(),
            leaves: self.leaves().map(|c| alphabet.render(c)).collect(),
            params: self
                .leaves
                .iter()
                .filter_map(|(c, p)| p.as_ref().map(|p| (alphabet.render(c), p.clone())))
                .collect(),
            max_depth: self.max_depth(),
        }
    }

    pub fn from_json(json: &TreeModelJson, alphabet: &Alphabet) -> Result<Self> {
        let parse = |s: &str| -> Result<Vec<Symbol>> {
            if s == "λ" {
                Ok(Vec::new())
            } else {
                alphabet.parse_string(s)
            }
        };
        let mut leaves = BTreeMap::new();
        for leaf in &json.leaves {
            let p = match json.params.get(leaf) {
                Some(p) => Some(p.clone()),
                None if leaf.is_empty() => json.params.get("λ").cloned(),
                None => None,
            };
            leaves.insert(parse(leaf)?, p);
        }
        Self::build(alphabet.size(), leaves)
    }
}

/// JSON form of a [`TreeModel`]. Context strings are alphabet labels, most
/// recent symbol first; the root is `""` (`"λ"` is accepted on input).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModelJson {
    pub contexts: Vec<String>,
    pub leaves: Vec<String>,
    #[serde(default)]
    pub params: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub max_depth: usize,
}
