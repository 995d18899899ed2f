use serde::{Deserialize, Serialize};

use crate::sequence::{Sequence, MAX_ALPHABET};
use crate::{Error, Result};

/// Deepest supported context tree.
pub const MAX_DEPTH: usize = 20;

/// Hyperparameters of the context-tree prior.
///
/// `beta` is the prior probability that a node above depth `D` is a leaf;
/// `alpha = (1 - beta)^(1/(m-1))` weighs each extra leaf.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BctParams {
    m: usize,
    depth: usize,
    beta: f64,
}

impl BctParams {
    pub fn new(m: usize, depth: usize, beta: Option<f64>) -> Result<Self> {
        if !(2..=MAX_ALPHABET).contains(&m) {
            return Err(Error::InvalidParameter(format!("alphabet size {m}")));
        }
        if depth > MAX_DEPTH {
            return Err(Error::InvalidParameter(format!("depth {depth} > {MAX_DEPTH}")));
        }
        let beta = beta.unwrap_or_else(|| Self::default_beta(m));
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidParameter(format!("beta {beta} outside (0,1)")));
        }
        Ok(Self { m, depth, beta })
    }

    /// `1 - 2^(-m+1)`.
    pub fn default_beta(m: usize) -> f64 {
        1.0 - 2f64.powi(1 - m as i32)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn alpha(&self) -> f64 {
        (1.0 - self.beta).powf(1.0 / (self.m as f64 - 1.0))
    }

    pub fn ln_beta(&self) -> f64 {
        self.beta.ln()
    }

    /// `ln(1 - beta)`, the log-weight of splitting a node.
    pub fn ln_split(&self) -> f64 {
        (-self.beta).ln_1p()
    }

    pub(crate) fn check_sequence(&self, seq: &Sequence) -> Result<()> {
        if seq.depth() != self.depth {
            return Err(Error::InvalidParameter(format!(
                "sequence context length {} != depth {}",
                seq.depth(),
                self.depth
            )));
        }
        if seq.alphabet().size() != self.m {
            return Err(Error::InvalidParameter(format!(
                "alphabet size {} != m {}",
                seq.alphabet().size(),
                self.m
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        assert_eq!(BctParams::new(2, 3, None).unwrap().beta(), 0.5);
        assert_eq!(BctParams::new(3, 3, None).unwrap().beta(), 0.75);
        assert_eq!(BctParams::new(4, 3, None).unwrap().beta(), 0.875);
    }

    #[test]
    fn alpha_consistent() {
        let p = BctParams::new(4, 2, None).unwrap();
        assert!((p.alpha().powi(3) - (1.0 - p.beta())).abs() < 1e-15);
        assert!((p.ln_split() - (1.0 - p.beta()).ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(BctParams::new(2, 1, Some(1.0)).is_err());
        assert!(BctParams::new(2, 1, Some(0.0)).is_err());
        assert!(BctParams::new(1, 1, None).is_err());
        assert!(BctParams::new(2, 21, None).is_err());
    }
}
