//! Proposal kernels.
//!
//! Random draws happen in a fixed order so that traces are reproducible for a
//! given generator and seed:
//!
//! 1. variable mode only: the move menu (`0..3` when `1 <= l < l_max`,
//!    `0..2` when `l = l_max`, no draw when `l = 0`);
//! 2. death: the index to delete; birth: the rank of the new position among
//!    free positions; within-`l`: the index to move, then the move type
//!    (`0` uniform jump, `1` neighbour shift), then either the rank of the
//!    free position or the direction (`0` left, `1` right);
//! 3. the acceptance coin (drawn by the sampler, always, even for
//!    self-transitions).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::changepoint::ChangePoints;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    /// Within-`l`: a point replaced by a uniformly chosen free position.
    Jump,
    /// Within-`l`: a point moved to one of its neighbours.
    Shift,
    Birth,
    Death,
}

impl MoveKind {
    pub fn changes_count(self) -> bool {
        matches!(self, MoveKind::Birth | MoveKind::Death)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Proposal {
    pub candidate: ChangePoints,
    pub kind: MoveKind,
}

/// The `rank`-th position of `2..=n-1` not in `occupied` (sorted).
fn free_position(occupied: &[usize], rank: usize) -> usize {
    let mut pos = 2 + rank;
    for &p in occupied {
        if p <= pos {
            pos += 1;
        } else {
            break;
        }
    }
    pos
}

fn free_count(cp: &ChangePoints) -> usize {
    (cp.n().saturating_sub(2)).saturating_sub(cp.ell())
}

/// Within-`l` move. The kernel is symmetric, so the log proposal ratio is 0.
///
/// A neighbour shift that would leave `2..=n-1` or land on an occupied
/// position proposes the current state unchanged.
pub fn propose_fixed<R: Rng + ?Sized>(cp: &ChangePoints, rng: &mut R) -> Proposal {
    assert!(cp.ell() >= 1, "within-l move needs at least one change-point");
    let n = cp.n();
    let i = rng.gen_range(0..cp.ell());
    let old = cp.positions()[i];
    let (kind, new) = if rng.gen_range(0..2) == 0 {
        let free = free_count(cp);
        if free == 0 {
            (MoveKind::Jump, old)
        } else {
            (MoveKind::Jump, free_position(cp.positions(), rng.gen_range(0..free)))
        }
    } else {
        let target = if rng.gen_range(0..2) == 0 { old - 1 } else { old + 1 };
        if target < 2 || target > n - 1 || cp.contains(target) {
            (MoveKind::Shift, old)
        } else {
            (MoveKind::Shift, target)
        }
    };
    let mut pos = cp.positions().to_vec();
    pos[i] = new;
    pos.sort_unstable();
    Proposal {
        candidate: ChangePoints::from_sorted_unchecked(n, pos),
        kind,
    }
}

fn birth<R: Rng + ?Sized>(cp: &ChangePoints, rng: &mut R) -> Proposal {
    let free = free_count(cp);
    if free == 0 {
        return Proposal {
            candidate: cp.clone(),
            kind: MoveKind::Birth,
        };
    }
    let p = free_position(cp.positions(), rng.gen_range(0..free));
    let mut pos = cp.positions().to_vec();
    let at = pos.partition_point(|&q| q < p);
    pos.insert(at, p);
    Proposal {
        candidate: ChangePoints::from_sorted_unchecked(cp.n(), pos),
        kind: MoveKind::Birth,
    }
}

fn death<R: Rng + ?Sized>(cp: &ChangePoints, rng: &mut R) -> Proposal {
    let mut pos = cp.positions().to_vec();
    pos.remove(rng.gen_range(0..pos.len()));
    Proposal {
        candidate: ChangePoints::from_sorted_unchecked(cp.n(), pos),
        kind: MoveKind::Death,
    }
}

/// Birth / death / within-`l` proposal for an unknown number of change-points.
pub fn propose_variable<R: Rng + ?Sized>(cp: &ChangePoints, ell_max: usize, rng: &mut R) -> Proposal {
    let ell = cp.ell();
    assert!(ell <= ell_max, "state has {ell} > {ell_max} change-points");
    if ell == 0 {
        return birth(cp, rng);
    }
    if ell < ell_max {
        match rng.gen_range(0..3) {
            0 => death(cp, rng),
            1 => birth(cp, rng),
            _ => propose_fixed(cp, rng),
        }
    } else {
        match rng.gen_range(0..2) {
            0 => death(cp, rng),
            _ => propose_fixed(cp, rng),
        }
    }
}
