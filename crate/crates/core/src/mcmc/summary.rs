//! Posterior summaries of a trace.
//!
//! `l_hat` is the mode of the `l` histogram (ties to the smaller `l`). Among
//! retained states with `l = l_hat`, the `r`-th smallest change-point of each
//! state is pooled into a per-rank histogram and `p_hat_r` is its mode (ties
//! to the smaller position).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Trace;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapEstimate {
    pub ell: usize,
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub retained: u64,
    pub ell_hist: Vec<u64>,
    /// `[position, count]` pairs of pooled locations.
    pub loc_hist: Vec<(usize, u64)>,
    pub map: MapEstimate,
    /// Per-rank location histograms given `l = map.ell`.
    pub conditional_hists: Vec<Vec<(usize, u64)>>,
    pub acceptance_rates: BTreeMap<String, f64>,
    /// Highest-posterior visited state.
    pub best_state: Option<MapEstimate>,
    pub best_log_posterior: Option<f64>,
}

fn mode_of(h: &BTreeMap<usize, u64>) -> Option<usize> {
    let mut best: Option<(usize, u64)> = None;
    for (&p, &c) in h {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((p, c));
        }
    }
    best.map(|(p, _)| p)
}

pub fn summarize(trace: &Trace) -> Result<Summary> {
    if trace.retained == 0 {
        return Err(Error::EmptyTrace);
    }
    let mut ell_hat = 0;
    for (ell, &c) in trace.ell_hist.iter().enumerate() {
        if c > trace.ell_hist[ell_hat] {
            ell_hat = ell;
        }
    }
    let ranks = trace.rank_hist.get(&ell_hat).cloned().unwrap_or_default();
    let positions = ranks
        .iter()
        .map(|h| mode_of(h).expect("rank histogram is non-empty"))
        .collect();
    let acceptance_rates = trace
        .moves
        .iter()
        .map(|(k, s)| {
            let name = serde_json::to_value(k)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_else(|| format!("{k:?}"));
            (name, s.rate())
        })
        .collect();
    Ok(Summary {
        retained: trace.retained,
        ell_hist: trace.ell_hist.clone(),
        loc_hist: trace.loc_hist.iter().map(|(&p, &c)| (p, c)).collect(),
        map: MapEstimate {
            ell: ell_hat,
            positions,
        },
        conditional_hists: ranks
            .iter()
            .map(|h| h.iter().map(|(&p, &c)| (p, c)).collect())
            .collect(),
        acceptance_rates,
        best_state: trace.best.as_ref().map(|(s, _)| MapEstimate {
            ell: s.ell(),
            positions: s.positions().to_vec(),
        }),
        best_log_posterior: trace.best.as_ref().map(|(_, v)| *v),
    })
}

impl Summary {
    /// Posterior frequency of each `l`.
    pub fn ell_frequencies(&self) -> Vec<f64> {
        self.ell_hist.iter().map(|&c| c as f64 / self.retained as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::changepoint::ChangePoints;
    use crate::mcmc::Mode;

    fn trace_of(states: &[&[usize]], n: usize, ell_max: usize) -> Trace {
        let mut t = Trace::new(n, Mode::Variable { ell_max });
        for (i, s) in states.iter().enumerate() {
            t.record(i + 1, &ChangePoints::new(n, s.to_vec()).unwrap(), usize::MAX);
        }
        t
    }

    #[test]
    fn identical_samples() {
        let t = trace_of(&[&[10, 40], &[10, 40], &[10, 40]], 100, 3);
        let s = summarize(&t).unwrap();
        assert_eq!(
            s.map,
            MapEstimate {
                ell: 2,
                positions: vec![10, 40]
            }
        );
        assert_eq!(s.ell_hist, vec![0, 0, 3, 0]);
        assert_eq!(s.loc_hist, vec![(10, 3), (40, 3)]);
    }

    #[test]
    fn per_rank_modes_and_ties() {
        let t = trace_of(
            &[&[10, 40], &[11, 40], &[11, 41], &[12, 41], &[20], &[20], &[20], &[20]],
            100,
            2,
        );
        let s = summarize(&t).unwrap();
        assert_eq!(s.map.ell, 1);
        assert_eq!(s.map.positions, vec![20]);
        let t = trace_of(&[&[10, 40], &[11, 40], &[11, 41], &[12, 41]], 100, 2);
        let s = summarize(&t).unwrap();
        // second rank ties between 40 and 41: smaller wins
        assert_eq!(s.map.positions, vec![11, 40]);
        assert_eq!(s.conditional_hists[0], vec![(10, 1), (11, 2), (12, 1)]);
    }

    #[test]
    fn ell_ties_go_to_smaller() {
        let t = trace_of(&[&[], &[30]], 100, 2);
        assert_eq!(summarize(&t).unwrap().map.ell, 0);
    }

    #[test]
    fn masses_match_retained() {
        let t = trace_of(&[&[10, 40], &[12], &[]], 100, 2);
        let s = summarize(&t).unwrap();
        assert_eq!(s.ell_hist.iter().sum::<u64>(), s.retained);
        assert_eq!(s.loc_hist.iter().map(|x| x.1).sum::<u64>(), 3);
    }

    #[test]
    fn empty_trace_is_error() {
        let t = Trace::new(10, Mode::Fixed { ell: 1 });
        assert!(matches!(summarize(&t), Err(Error::EmptyTrace)));
    }
}
