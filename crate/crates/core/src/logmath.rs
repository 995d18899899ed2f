//! Log-domain helpers.

/// `ln(exp(a) + exp(b))` without overflow. `-inf` is the additive identity.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if hi.is_nan() || lo.is_nan() {
        return f64::NAN;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ exp(x_i)`; returns `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Normalise log-weights into probabilities. Entries at `-inf` map to exactly 0.
pub fn normalize_log_weights(xs: &[f64]) -> Vec<f64> {
    let z = log_sum_exp(xs);
    xs.iter()
        .map(|&x| if x == f64::NEG_INFINITY { 0.0 } else { (x - z).exp() })
        .collect()
}

/// `ln C(n, k)` as a finite sum of `k` logs; `-inf` when `k > n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64).ln() - (i as f64).ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn log_add_exp_matches_direct(x in -30f64..30.0, y in -30f64..30.0) {
            let direct = (x.exp() + y.exp()).ln();
            prop_assert!((log_add_exp(x, y) - direct).abs() < 1e-12);
            prop_assert_eq!(log_add_exp(x, y), log_add_exp(y, x));
            prop_assert_eq!(log_add_exp(x, f64::NEG_INFINITY), x);
        }
    }

    #[test]
    fn neg_inf_identity() {
        let ninf = f64::NEG_INFINITY;
        assert_eq!(log_add_exp(ninf, ninf), ninf);
        assert_eq!(log_sum_exp(&[]), ninf);
        assert_eq!(log_sum_exp(&[ninf, ninf]), ninf);
        assert_eq!(normalize_log_weights(&[ninf, 0.0]), vec![0.0, 1.0]);
    }

    #[test]
    fn binomials() {
        assert!((ln_binomial(10, 3) - 120f64.ln()).abs() < 1e-12);
        assert!((ln_binomial(3, 3)).abs() < 1e-15);
        assert_eq!(ln_binomial(2, 3), f64::NEG_INFINITY);
        assert!((ln_binomial(48500, 21) - ln_binomial(48500, 48479)).abs() < 1e-9);
    }
}
