use std::collections::HashSet;

use rand::Rng;

use super::forward::ActionDistribution;
use super::MASKED_LOGIT;
use crate::instances::{Instance, Solution};
use crate::operators::{canonical, delta_unchecked, improves, node_pair_action, Action, OperatorKind};

/// A cell of the action matrix: the ordered node pair `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodePair {
    pub u: usize,
    pub v: usize,
}

impl NodePair {
    pub fn from_cell(cell: usize, n: usize) -> Self {
        NodePair { u: cell / n, v: cell % n }
    }

    pub fn cell(self, n: usize) -> usize {
        self.u * n + self.v
    }

    /// Operator action this pair stands for in `sol`.
    pub fn action(self, sol: &Solution) -> Action {
        node_pair_action(sol, None, self.u, self.v)
    }
}

fn selectable(dist: &ActionDistribution, cell: usize) -> bool {
    cell / dist.n != cell % dist.n && dist.logits[cell] > MASKED_LOGIT / 2.0
}

/// Categorical draw over the unmasked cells.
pub fn sample_action<R: Rng + ?Sized>(dist: &ActionDistribution, rng: &mut R) -> NodePair {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = None;
    for (cell, &p) in dist.probs.iter().enumerate() {
        if p <= 0.0 || !selectable(dist, cell) {
            continue;
        }
        acc += p;
        last = Some(cell);
        if r < acc {
            return NodePair::from_cell(cell, dist.n);
        }
    }
    // r landed in the rounding gap above the cumulative sum
    NodePair::from_cell(last.expect("distribution has no selectable cell"), dist.n)
}

/// Most probable unmasked cell; ties go to the smallest `(u, v)`.
pub fn argmax_action(dist: &ActionDistribution) -> NodePair {
    let mut best: Option<(usize, f64)> = None;
    for (cell, &p) in dist.probs.iter().enumerate() {
        if selectable(dist, cell) && best.is_none_or(|(_, bp)| p > bp) {
            best = Some((cell, p));
        }
    }
    NodePair::from_cell(best.expect("distribution has no selectable cell").0, dist.n)
}

/// Unmasked cells by descending probability, ties by ascending cell index.
pub fn probability_order(dist: &ActionDistribution) -> Vec<usize> {
    let mut cells: Vec<usize> = (0..dist.probs.len()).filter(|&c| selectable(dist, c)).collect();
    cells.sort_by(|&a, &b| dist.probs[b].total_cmp(&dist.probs[a]).then(a.cmp(&b)));
    cells
}

/// Outcome of a probability-ordered scan for an improving move.
#[derive(Debug, Clone, PartialEq)]
pub struct ImprovingSearch {
    /// The improving pair, its action and raw objective delta.
    pub found: Option<(NodePair, Action, f64)>,
    /// Number of distinct neighbors evaluated.
    pub evals: usize,
    /// True if the scan stopped because `max_evals` was reached.
    pub exhausted_budget: bool,
}

/// Walks cells in [`probability_order`] and returns the first strictly
/// improving move. Invalid cells, no-op moves and repeats of an already
/// inspected neighbor are skipped without being charged. At most
/// `max_evals` neighbors are evaluated.
pub fn first_improving_action(
    dist: &ActionDistribution,
    inst: &Instance,
    sol: &Solution,
    op: OperatorKind,
    max_evals: usize,
) -> ImprovingSearch {
    let sense = inst.sense();
    let pos = sol.as_perm().map(|p| p.positions());
    let mut seen = HashSet::new();
    let mut evals = 0;
    for cell in probability_order(dist) {
        let pair = NodePair::from_cell(cell, dist.n);
        let a = node_pair_action(sol, pos.as_deref(), pair.u, pair.v);
        if op.validate(sol, a).is_err() {
            continue;
        }
        let Some(c) = canonical(op, sol, a) else { continue };
        if !seen.insert(c) {
            continue;
        }
        if evals == max_evals {
            return ImprovingSearch { found: None, evals, exhausted_budget: true };
        }
        evals += 1;
        let d = delta_unchecked(inst, sol, op, c);
        if improves(sense.gain(d)) {
            return ImprovingSearch { found: Some((pair, a, d)), evals, exhausted_budget: false };
        }
    }
    ImprovingSearch { found: None, evals, exhausted_budget: false }
}
