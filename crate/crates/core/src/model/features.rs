use ndarray::{Array2, Array3};

use super::{cst, Scalar};
use crate::error::{Error, Result};
use crate::instances::{Instance, Solution};
use crate::operators::{canonical, node_pair_action, OperatorKind};

/// Raw node features `[n, k]` and edge features `[n, n, 2]` for one state.
///
/// Channel 0 of `x[i][j]` carries the edge weight when the pair is "active"
/// in the solution (PRP: `i` ranked before `j`; TSP: `i` and `j` adjacent in
/// the tour; GPP: the edge crosses the cut), channel 1 carries it otherwise.
pub fn build_features<F: Scalar>(inst: &Instance, sol: &Solution) -> Result<(Array2<F>, Array3<F>)> {
    let n = inst.n();
    if sol.len() != n {
        return Err(Error::arg(format!("solution size {} does not match instance size {n}", sol.len())));
    }
    let mut x = Array3::<F>::zeros((n, n, 2));
    let nodes = match inst {
        Instance::Tsp(t) => Array2::from_shape_fn((n, 2), |(i, c)| cst(t.coords()[i][c])),
        _ => Array2::ones((n, 1)),
    };
    match (inst, sol) {
        (Instance::Prp(_), Solution::Perm(p)) => {
            let pos = p.positions();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let ch = if pos[i] < pos[j] { 0 } else { 1 };
                        x[[i, j, ch]] = cst(inst.weight(i, j));
                    }
                }
            }
        }
        (Instance::Tsp(_), Solution::Perm(p)) => {
            let pos = p.positions();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let gap = pos[i].abs_diff(pos[j]);
                        let consecutive = gap == 1 || gap == n - 1;
                        x[[i, j, if consecutive { 0 } else { 1 }]] = cst(inst.weight(i, j));
                    }
                }
            }
        }
        (Instance::Gpp(_), Solution::Part(b)) => {
            let s = b.sides();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        x[[i, j, if s[i] != s[j] { 0 } else { 1 }]] = cst(inst.weight(i, j));
                    }
                }
            }
        }
        _ => return Err(Error::arg("solution kind does not match the instance")),
    }
    Ok((nodes, x))
}

/// Which cells of the action matrix the policy may pick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskPolicy {
    /// Diagonal plus pairs the operator rejects (non-adjacent pairs for
    /// adjacent swaps).
    #[default]
    Invalid,
    /// Additionally masks pairs whose move is a no-op, such as swapping two
    /// nodes on the same side of a partition.
    InvalidAndNoOp,
}

/// A batch of equally sized states flattened for the network:
/// node rows are `b * n + i`, edge rows are `(b * n + i) * n + j`.
#[derive(Debug, Clone)]
pub struct StateBatch<F> {
    pub batch: usize,
    pub n: usize,
    pub nodes: Array2<F>,
    pub edges: Array2<F>,
    /// `true` where the cell may be selected; length `batch * n * n`.
    pub allowed: Vec<bool>,
}

impl<F: Scalar> StateBatch<F> {
    pub fn build(states: &[(&Instance, &Solution)], op: OperatorKind, mask: MaskPolicy) -> Result<Self> {
        let Some((first, _)) = states.first() else {
            return Err(Error::arg("empty batch"));
        };
        let n = first.n();
        let k = if first.problem() == crate::instances::ProblemKind::Tsp { 2 } else { 1 };
        let batch = states.len();
        let mut nodes = Array2::<F>::zeros((batch * n, k));
        let mut edges = Array2::<F>::zeros((batch * n * n, 2));
        let mut allowed = vec![false; batch * n * n];
        for (b, (inst, sol)) in states.iter().enumerate() {
            if inst.n() != n || inst.problem() != first.problem() {
                return Err(Error::arg("batch members must share problem and size"));
            }
            let (nf, x) = build_features::<F>(inst, sol)?;
            nodes.slice_mut(ndarray::s![b * n..(b + 1) * n, ..]).assign(&nf);
            let flat = x.into_shape_with_order((n * n, 2)).expect("contiguous features");
            edges.slice_mut(ndarray::s![b * n * n..(b + 1) * n * n, ..]).assign(&flat);
            let pos = sol.as_perm().map(|p| p.positions());
            for u in 0..n {
                for v in 0..n {
                    if u == v {
                        continue;
                    }
                    let a = node_pair_action(sol, pos.as_deref(), u, v);
                    let ok = op.validate(sol, a).is_ok()
                        && (mask == MaskPolicy::Invalid || canonical(op, sol, a).is_some());
                    allowed[(b * n + u) * n + v] = ok;
                }
            }
        }
        Ok(StateBatch { batch, n, nodes, edges, allowed })
    }

    /// Single-state batch with only the diagonal masked.
    pub fn single(inst: &Instance, sol: &Solution) -> Result<Self> {
        let (nf, x) = build_features::<F>(inst, sol)?;
        Ok(Self::from_features(nf, x))
    }

    pub fn from_features(nodes: Array2<F>, x: Array3<F>) -> Self {
        let n = x.shape()[0];
        let edges = x.into_shape_with_order((n * n, 2)).expect("contiguous features");
        let allowed = (0..n * n).map(|c| c / n != c % n).collect();
        StateBatch { batch: 1, n, nodes, edges, allowed }
    }
}
