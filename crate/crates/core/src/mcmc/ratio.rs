//! Metropolis–Hastings acceptance ratios.

use super::MoveKind;
use crate::changepoint::ChangePoints;
use crate::{Error, Result};

/// Birth/death correction factor for the variable-`l` sampler: the proposal
/// probabilities and the `K_l` normalisers of the position prior, combined.
///
/// Cases are tried in order; within-`l` moves get 1.
pub fn count_move_correction(ell: usize, ell_new: usize, n: usize, ell_max: usize) -> Result<f64> {
    if ell_max < 2 {
        return Err(Error::InvalidParameter(format!("ell_max = {ell_max} < 2")));
    }
    let n = n as f64;
    let lm = ell_max as f64;
    let f = |x: usize| x as f64;
    let value = if ell == 0 {
        if ell_new != 1 {
            return Err(Error::RatioCaseMismatch(format!("from l = 0 to l' = {ell_new}")));
        }
        2.0 * (n - 2.0) / ((n - 3.0) * (n - 4.0))
    } else if ell == 1 && ell_new == 0 {
        (n - 3.0) * (n - 4.0) / (2.0 * (n - 2.0))
    } else if ell + 1 == ell_max && ell_new == ell_max {
        3.0 * (2.0 * lm + 1.0) * (n - lm - 1.0) / ((n - 2.0 * lm - 2.0) * (n - 2.0 * lm - 1.0))
    } else if ell == ell_max && ell_new + 1 == ell_max {
        (n - 2.0 * lm - 2.0) * (n - 2.0 * lm - 1.0) / (3.0 * (2.0 * lm + 1.0) * (n - lm - 1.0))
    } else if ell_new + 1 == ell {
        let l = f(ell);
        (n - 2.0 * l - 2.0) * (n - 2.0 * l - 1.0) / (2.0 * (2.0 * l + 1.0) * (n - l - 1.0))
    } else if ell_new == ell + 1 {
        let l = f(ell_new);
        2.0 * (2.0 * l + 1.0) * (n - l - 1.0) / ((n - 2.0 * l - 2.0) * (n - 2.0 * l - 1.0))
    } else if ell_new == ell {
        1.0
    } else {
        return Err(Error::RatioCaseMismatch(format!("from l = {ell} to l' = {ell_new}")));
    };
    if ell.max(ell_new) > ell_max {
        return Err(Error::RatioCaseMismatch(format!(
            "l' = {ell_new} beyond l_max = {ell_max}"
        )));
    }
    Ok(value)
}

/// `ln r` for a within-`l` move: evidence ratio times gap-product ratio.
/// `-inf` when the candidate has zero prior mass.
pub fn log_ratio_fixed(
    current: &ChangePoints,
    current_log_evidence: f64,
    candidate: &ChangePoints,
    candidate_log_evidence: f64,
) -> f64 {
    let gaps = candidate.log_gap_product();
    if gaps == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    candidate_log_evidence - current_log_evidence + gaps - current.log_gap_product()
}

/// `ln r` for the variable-`l` sampler, checking that the move tag agrees
/// with the change in `l`.
pub fn accept_ratio_variable(
    current: &ChangePoints,
    current_log_evidence: f64,
    candidate: &ChangePoints,
    candidate_log_evidence: f64,
    kind: MoveKind,
    ell_max: usize,
) -> Result<f64> {
    let (ell, ell_new) = (current.ell(), candidate.ell());
    let consistent = match kind {
        MoveKind::Birth => ell_new == ell + 1 || candidate == current,
        MoveKind::Death => ell_new + 1 == ell,
        MoveKind::Jump | MoveKind::Shift => ell_new == ell,
    };
    if !consistent {
        return Err(Error::RatioCaseMismatch(format!(
            "{kind:?} from l = {ell} to l' = {ell_new}"
        )));
    }
    if candidate == current {
        return Ok(0.0);
    }
    let correction = count_move_correction(ell, ell_new, current.n(), ell_max)?;
    let base = log_ratio_fixed(current, current_log_evidence, candidate, candidate_log_evidence);
    if base == f64::NEG_INFINITY {
        return Ok(base);
    }
    Ok(base + correction.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logmath::ln_binomial;

    /// Hastings correction derived from first principles: menu probabilities
    /// of the three-case proposal and `K_l = C(n-2, 2l+1)`.
    fn generic_correction(ell: usize, ell_new: usize, n: usize, ell_max: usize) -> f64 {
        let menu = |l: usize| -> f64 {
            if l == 0 {
                1.0
            } else if l < ell_max {
                1.0 / 3.0
            } else {
                0.5
            }
        };
        let free = |l: usize| (n - l - 2) as f64;
        let (q_fwd, q_rev) = if ell_new == ell + 1 {
            (menu(ell) / free(ell), menu(ell_new) / ell_new as f64)
        } else {
            (menu(ell) / ell as f64, menu(ell_new) / free(ell_new))
        };
        let k = |l: usize| ln_binomial(n as u64 - 2, 2 * l as u64 + 1);
        (q_rev / q_fwd) * (k(ell) - k(ell_new)).exp()
    }

    #[test]
    fn matches_first_principles() {
        for n in [30usize, 57, 200, 4300] {
            for ell_max in 2..=6 {
                for ell in 0..ell_max {
                    let up = count_move_correction(ell, ell + 1, n, ell_max).unwrap();
                    let g = generic_correction(ell, ell + 1, n, ell_max);
                    assert!((up / g - 1.0).abs() < 1e-9, "n={n} lmax={ell_max} {ell}->{}", ell + 1);
                    let down = count_move_correction(ell + 1, ell, n, ell_max).unwrap();
                    let g = generic_correction(ell + 1, ell, n, ell_max);
                    assert!((down / g - 1.0).abs() < 1e-9, "n={n} lmax={ell_max} {}->{ell}", ell + 1);
                }
            }
        }
    }

    #[test]
    fn reciprocal_pairs() {
        for n in [12usize, 25, 100, 1000, 48502] {
            for ell_max in 2..=10 {
                if n < 2 * ell_max + 4 {
                    continue;
                }
                for ell in 0..ell_max {
                    let up = count_move_correction(ell, ell + 1, n, ell_max).unwrap();
                    let down = count_move_correction(ell + 1, ell, n, ell_max).unwrap();
                    assert!((up * down - 1.0).abs() < 1e-12, "n={n} lmax={ell_max} l={ell}");
                }
            }
        }
    }

    #[test]
    fn specific_values() {
        assert!((count_move_correction(0, 1, 10, 5).unwrap() - 8.0 / 21.0).abs() < 1e-15);
        assert_eq!(count_move_correction(3, 3, 100, 5).unwrap(), 1.0);
        assert_eq!(count_move_correction(5, 5, 100, 5).unwrap(), 1.0);
    }

    #[test]
    fn within_moves_use_unit_correction() {
        let a = ChangePoints::new(50, vec![10, 30]).unwrap();
        let b = ChangePoints::new(50, vec![11, 30]).unwrap();
        let fixed = log_ratio_fixed(&a, -10.0, &b, -9.0);
        let var = accept_ratio_variable(&a, -10.0, &b, -9.0, MoveKind::Shift, 4).unwrap();
        assert_eq!(fixed, var);
        assert_eq!(
            accept_ratio_variable(&a, -10.0, &a, -10.0, MoveKind::Jump, 4).unwrap(),
            0.0
        );
        let adj = ChangePoints::new(50, vec![10, 11]).unwrap();
        assert_eq!(log_ratio_fixed(&a, -10.0, &adj, 0.0), f64::NEG_INFINITY);
        assert!(accept_ratio_variable(&a, -10.0, &adj, 0.0, MoveKind::Birth, 4).is_err());
    }

    #[test]
    fn mismatches_are_errors() {
        assert!(count_move_correction(0, 2, 100, 5).is_err());
        assert!(count_move_correction(2, 4, 100, 5).is_err());
        assert!(count_move_correction(5, 6, 100, 5).is_err());
        assert!(count_move_correction(0, 1, 100, 1).is_err());
    }
}
