//! Krichevsky–Trofimov estimator: the marginal probability of a count vector
//! under a Dirichlet(1/2, ..., 1/2) prior,
//!
//! ```text
//! Pe(a) = prod_j prod_{i<a_j} (i + 1/2) / prod_{i<M} (i + m/2),   M = sum_j a_j
//! ```

use crate::Symbol;

/// `ln Pe(a)` by direct summation of the product terms.
pub fn kt_log_prob(counts: &[u32]) -> f64 {
    let m = counts.len() as f64;
    let total: u64 = counts.iter().map(|&c| c as u64).sum();
    let num: f64 = counts
        .iter()
        .map(|&c| (0..c).map(|i| (i as f64 + 0.5).ln()).sum::<f64>())
        .sum();
    let den: f64 = (0..total).map(|i| (i as f64 + m / 2.0).ln()).sum();
    num - den
}

/// Posterior mean of a leaf's parameters: `(a_j + 1/2) / (M + m/2)`.
pub fn leaf_posterior_mean(counts: &[u32]) -> Vec<f64> {
    let m = counts.len() as f64;
    let total: f64 = counts.iter().map(|&c| c as f64).sum();
    counts.iter().map(|&c| (c as f64 + 0.5) / (total + m / 2.0)).collect()
}

/// Cumulative log-product tables so that `ln Pe(a)` costs `O(m)`.
#[derive(Debug, Clone)]
pub struct KtTable {
    m: usize,
    /// `half[k] = sum_{i<k} ln(i + 1/2)`
    half: Vec<f64>,
    /// `denom[k] = sum_{i<k} ln(i + m/2)`
    denom: Vec<f64>,
}

impl KtTable {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            half: vec![0.0],
            denom: vec![0.0],
        }
    }

    /// Extend the tables to cover counts up to `max`.
    pub fn reserve(&mut self, max: usize) {
        let half_m = self.m as f64 / 2.0;
        while self.half.len() <= max {
            let k = self.half.len() - 1;
            let h = self.half[k] + (k as f64 + 0.5).ln();
            let d = self.denom[k] + (k as f64 + half_m).ln();
            self.half.push(h);
            self.denom.push(d);
        }
    }

    /// `ln Pe(a)`; the table must already cover `sum(a)`.
    #[inline]
    pub fn log_pe(&self, counts: &[u32]) -> f64 {
        let mut total = 0usize;
        let mut num = 0.0;
        for &c in counts {
            total += c as usize;
            num += self.half[c as usize];
        }
        num - self.denom[total]
    }

    /// Sequential KT probability of the next symbol given counts.
    pub fn predictive(&self, counts: &[u32], next: Symbol) -> f64 {
        let total: u32 = counts.iter().sum();
        (counts[next as usize] as f64 + 0.5) / (total as f64 + self.m as f64 / 2.0)
    }
}
