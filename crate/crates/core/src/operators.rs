//! Pairwise modification operators and their neighborhoods.
//!
//! For permutations an [`Action`] `(i, j)` names two *positions*; for
//! bipartitions it names two *nodes*. The policy network scores node pairs,
//! which [`node_pair_action`] maps onto actions.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{Instance, Permutation, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action {
    pub i: usize,
    pub j: usize,
}

impl Action {
    pub fn new(i: usize, j: usize) -> Self {
        Action { i, j }
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.i, self.j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Remove the item at position `i` and reinsert it at position `j`.
    Insert,
    /// Exchange the items at positions `i` and `j`.
    Swap,
    /// Swap restricted to neighboring positions.
    AdjacentSwap,
    /// Reverse the segment between positions `i` and `j` inclusive.
    Reverse,
    /// Segment reversal on a cyclic tour; neighbors are distinct tours.
    TwoOpt,
    /// Exchange the sides of nodes `i` and `j`.
    GppSwap,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Insert => "insert",
            OperatorKind::Swap => "swap",
            OperatorKind::AdjacentSwap => "adjacent_swap",
            OperatorKind::Reverse => "reverse",
            OperatorKind::TwoOpt => "two_opt",
            OperatorKind::GppSwap => "gpp_swap",
        }
    }

    pub fn acts_on_partitions(self) -> bool {
        self == OperatorKind::GppSwap
    }

    /// Checks that `a` is a legal action for this operator on `sol`.
    pub fn validate(self, sol: &Solution, a: Action) -> Result<()> {
        let n = sol.len();
        match (self.acts_on_partitions(), sol) {
            (true, Solution::Perm(_)) => {
                return Err(Error::arg("gpp_swap applies to bipartitions only"));
            }
            (false, Solution::Part(_)) => {
                return Err(Error::arg(format!("{} applies to permutations only", self.name())));
            }
            _ => {}
        }
        if a.i >= n || a.j >= n {
            return Err(Error::arg(format!("action {a} out of range for n = {n}")));
        }
        if a.i == a.j {
            return Err(Error::arg(format!("action {a} needs two distinct indices")));
        }
        if self == OperatorKind::AdjacentSwap && a.i.abs_diff(a.j) != 1 {
            return Err(Error::arg(format!("adjacent_swap needs neighboring positions, got {a}")));
        }
        Ok(())
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "insert" => Ok(OperatorKind::Insert),
            "swap" => Ok(OperatorKind::Swap),
            "adjacent_swap" => Ok(OperatorKind::AdjacentSwap),
            "reverse" => Ok(OperatorKind::Reverse),
            "two_opt" | "2opt" | "2_opt" => Ok(OperatorKind::TwoOpt),
            "gpp_swap" => Ok(OperatorKind::GppSwap),
            other => Err(Error::arg(format!("unknown operator '{other}'"))),
        }
    }
}

impl std::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Returns the modified solution; the input is left untouched.
pub fn apply(op: OperatorKind, sol: &Solution, a: Action) -> Result<Solution> {
    op.validate(sol, a)?;
    let mut out = sol.clone();
    apply_in_place(op, &mut out, a);
    Ok(out)
}

/// Unchecked in-place application; the caller guarantees validity.
pub(crate) fn apply_in_place(op: OperatorKind, sol: &mut Solution, a: Action) {
    match sol {
        Solution::Perm(p) => {
            let w = p.order_mut();
            match op {
                OperatorKind::Insert => {
                    let item = w.remove(a.i);
                    w.insert(a.j, item);
                }
                OperatorKind::Swap | OperatorKind::AdjacentSwap => w.swap(a.i, a.j),
                OperatorKind::Reverse | OperatorKind::TwoOpt => {
                    let (lo, hi) = (a.i.min(a.j), a.i.max(a.j));
                    w[lo..=hi].reverse();
                }
                OperatorKind::GppSwap => unreachable!("validated"),
            }
        }
        Solution::Part(b) => {
            let s = b.sides_mut();
            s.swap(a.i, a.j);
        }
    }
}

/// Maps a node pair scored by the policy onto an operator action.
#[inline]
pub fn node_pair_action(sol: &Solution, positions: Option<&[usize]>, u: usize, v: usize) -> Action {
    match (sol, positions) {
        (Solution::Perm(_), Some(pos)) => Action::new(pos[u], pos[v]),
        (Solution::Perm(p), None) => {
            let pos = p.positions();
            Action::new(pos[u], pos[v])
        }
        (Solution::Part(_), _) => Action::new(u, v),
    }
}

/// Representative of the neighbor an action leads to, or `None` when the
/// action leaves the solution unchanged. Two actions reach the same neighbor
/// iff their canonical forms agree.
pub fn canonical(op: OperatorKind, sol: &Solution, a: Action) -> Option<Action> {
    let n = sol.len();
    let (lo, hi) = (a.i.min(a.j), a.i.max(a.j));
    match op {
        OperatorKind::Insert => {
            if a.j + 1 == a.i {
                Some(Action::new(a.j, a.i))
            } else {
                Some(a)
            }
        }
        OperatorKind::Swap | OperatorKind::AdjacentSwap | OperatorKind::Reverse => Some(Action::new(lo, hi)),
        OperatorKind::TwoOpt => {
            if n < 4 || (lo == 0 && hi + 2 >= n) || (lo == 1 && hi + 1 == n) {
                None
            } else if hi + 1 == n {
                Some(Action::new(0, lo - 1))
            } else {
                Some(Action::new(lo, hi))
            }
        }
        OperatorKind::GppSwap => {
            let s = sol.as_part()?.sides();
            (s[lo] != s[hi]).then_some(Action::new(lo, hi))
        }
    }
}

/// Canonical actions of all distinct neighbors, in row-major order.
pub fn neighborhood(op: OperatorKind, sol: &Solution) -> Vec<Action> {
    let n = sol.len();
    let mut out = Vec::new();
    match op {
        OperatorKind::Insert => {
            for i in 0..n {
                for j in 0..n {
                    if i != j && j + 1 != i {
                        out.push(Action::new(i, j));
                    }
                }
            }
        }
        OperatorKind::Swap | OperatorKind::Reverse => {
            for i in 0..n {
                for j in (i + 1)..n {
                    out.push(Action::new(i, j));
                }
            }
        }
        OperatorKind::AdjacentSwap => {
            for i in 1..n {
                out.push(Action::new(i - 1, i));
            }
        }
        OperatorKind::TwoOpt => {
            for i in 0..n {
                for j in (i + 1)..n {
                    let a = Action::new(i, j);
                    if canonical(op, sol, a) == Some(a) {
                        out.push(a);
                    }
                }
            }
        }
        OperatorKind::GppSwap => {
            if let Some(b) = sol.as_part() {
                let s = b.sides();
                for i in 0..n {
                    for j in (i + 1)..n {
                        if s[i] != s[j] {
                            out.push(Action::new(i, j));
                        }
                    }
                }
            }
        }
    }
    out
}

fn tour_key(p: &Permutation) -> Vec<usize> {
    let w = p.order();
    let n = w.len();
    if n < 3 {
        return w.to_vec();
    }
    let start = w.iter().position(|&v| v == 0).unwrap();
    let fwd: Vec<usize> = (0..n).map(|k| w[(start + k) % n]).collect();
    let bwd: Vec<usize> = (0..n).map(|k| w[(start + n - k) % n]).collect();
    fwd.min(bwd)
}

/// All distinct solutions one application of `op` away from `sol`, found by
/// applying every ordered pair and deduplicating. Tours are compared up to
/// rotation and direction for [`OperatorKind::TwoOpt`].
pub fn enumerate_neighbors(op: OperatorKind, sol: &Solution) -> Result<Vec<Solution>> {
    let n = sol.len();
    let key = |s: &Solution| -> Solution {
        match (op, s) {
            (OperatorKind::TwoOpt, Solution::Perm(p)) => {
                Solution::Perm(Permutation::new(tour_key(p)).expect("rotation of a permutation"))
            }
            _ => s.clone(),
        }
    };
    let own = key(sol);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let a = Action::new(i, j);
            if op.validate(sol, a).is_err() {
                continue;
            }
            let next = apply(op, sol, a)?;
            let k = key(&next);
            if k != own && seen.insert(k) {
                out.push(next);
            }
        }
    }
    Ok(out)
}

/// Raw objective change `f(apply(sol, a)) - f(sol)`. Uses O(n) shortcuts
/// where available; otherwise re-evaluates.
pub fn delta(inst: &Instance, sol: &Solution, op: OperatorKind, a: Action) -> Result<f64> {
    op.validate(sol, a)?;
    Ok(delta_unchecked(inst, sol, op, a))
}

pub(crate) fn delta_unchecked(inst: &Instance, sol: &Solution, op: OperatorKind, a: Action) -> f64 {
    match (inst, sol) {
        (Instance::Prp(p), Solution::Perm(perm)) => {
            let w = perm.order();
            match op {
                OperatorKind::Insert => {
                    let x = w[a.i];
                    let mut d = 0.0;
                    if a.i < a.j {
                        for &y in &w[a.i + 1..=a.j] {
                            d += p.b(y, x) - p.b(x, y);
                        }
                    } else {
                        for &y in &w[a.j..a.i] {
                            d += p.b(x, y) - p.b(y, x);
                        }
                    }
                    d
                }
                OperatorKind::Swap | OperatorKind::AdjacentSwap => {
                    let (lo, hi) = (a.i.min(a.j), a.i.max(a.j));
                    let (x, y) = (w[lo], w[hi]);
                    let mut d = p.b(y, x) - p.b(x, y);
                    for &z in &w[lo + 1..hi] {
                        d += p.b(y, z) - p.b(x, z) + p.b(z, x) - p.b(z, y);
                    }
                    d
                }
                OperatorKind::Reverse | OperatorKind::TwoOpt => {
                    let (lo, hi) = (a.i.min(a.j), a.i.max(a.j));
                    let seg = &w[lo..=hi];
                    let mut d = 0.0;
                    for (k, &x) in seg.iter().enumerate() {
                        for &y in &seg[k + 1..] {
                            d += p.b(y, x) - p.b(x, y);
                        }
                    }
                    d
                }
                OperatorKind::GppSwap => unreachable!("validated"),
            }
        }
        (Instance::Tsp(t), Solution::Perm(perm)) if matches!(op, OperatorKind::Reverse | OperatorKind::TwoOpt) => {
            let w = perm.order();
            let n = w.len();
            let (lo, hi) = (a.i.min(a.j), a.i.max(a.j));
            if lo == 0 && hi + 1 == n {
                return 0.0;
            }
            let prev = w[(lo + n - 1) % n];
            let next = w[(hi + 1) % n];
            t.dist(prev, w[hi]) + t.dist(w[lo], next) - t.dist(prev, w[lo]) - t.dist(w[hi], next)
        }
        (Instance::Gpp(g), Solution::Part(part)) => {
            let s = part.sides();
            let (u, v) = (a.i, a.j);
            if s[u] == s[v] {
                return 0.0;
            }
            let mut d = 0.0;
            for k in 0..s.len() {
                if k == u || k == v {
                    continue;
                }
                // u moves to v's side and vice versa
                let sign = if s[k] == s[u] { 1.0 } else { -1.0 };
                d += sign * (g.b(u, k) - g.b(v, k));
            }
            d
        }
        _ => {
            let mut next = sol.clone();
            apply_in_place(op, &mut next, a);
            inst.objective(&next).expect("validated solution")
                - inst.objective(sol).expect("validated solution")
        }
    }
}

/// Gains at or below this are treated as no improvement, so rounding noise
/// in incremental deltas never counts as progress.
pub const IMPROVEMENT_TOL: f64 = 1e-9;

#[inline]
pub fn improves(gain: f64) -> bool {
    gain > IMPROVEMENT_TOL
}

/// Best distinct neighbor by full scan: `(action, raw delta)`. Ties go to
/// the lexicographically smallest action. `None` if the neighborhood is empty.
pub fn best_neighbor(inst: &Instance, sol: &Solution, op: OperatorKind) -> Option<(Action, f64)> {
    let sense = inst.sense();
    let mut best: Option<(Action, f64)> = None;
    for a in neighborhood(op, sol) {
        let d = delta_unchecked(inst, sol, op, a);
        if best.is_none_or(|(_, bd)| sense.gain(d) > sense.gain(bd)) {
            best = Some((a, d));
        }
    }
    best
}

/// Gains (improvements, positive = better) of every distinct neighbor, in
/// [`neighborhood`] order.
pub fn neighborhood_gains(inst: &Instance, sol: &Solution, op: OperatorKind) -> Vec<(Action, f64)> {
    let sense = inst.sense();
    neighborhood(op, sol)
        .into_iter()
        .map(|a| (a, sense.gain(delta_unchecked(inst, sol, op, a))))
        .collect()
}

/// Gain of an arbitrary valid action, computed through its canonical form
/// so duplicates of the same neighbor score identically.
pub fn action_gain(inst: &Instance, sol: &Solution, op: OperatorKind, a: Action) -> Result<f64> {
    op.validate(sol, a)?;
    Ok(match canonical(op, sol, a) {
        Some(c) => inst.sense().gain(delta_unchecked(inst, sol, op, c)),
        None => 0.0,
    })
}

/// 1-based competition rank of `a` among the distinct neighbors (1 = best).
pub fn action_rank(inst: &Instance, sol: &Solution, op: OperatorKind, a: Action) -> Result<usize> {
    let g = action_gain(inst, sol, op, a)?;
    Ok(1 + neighborhood_gains(inst, sol, op).iter().filter(|(_, x)| *x > g).count())
}
