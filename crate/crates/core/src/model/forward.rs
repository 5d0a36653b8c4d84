use ndarray::{s, Array1, Array2, Axis, Zip};

use super::features::{MaskPolicy, StateBatch};
use super::params::{BatchNorm, ModelParams};
use super::{cst, Mode, Scalar, BN_EPS, BN_MOMENTUM, MASKED_LOGIT};
use crate::error::{Error, Result};
use crate::instances::{Instance, Solution};
use crate::operators::OperatorKind;

/// Node and edge embeddings of a batch, rows laid out as in [`StateBatch`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState<F> {
    pub batch: usize,
    pub n: usize,
    pub h: Array2<F>,
    pub e: Array2<F>,
}

/// Probability of every ordered node pair for one state, row-major `n * n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    pub n: usize,
    pub probs: Vec<f64>,
    pub logits: Vec<f64>,
}

impl ActionDistribution {
    #[inline]
    pub fn p(&self, u: usize, v: usize) -> f64 {
        self.probs[u * self.n + v]
    }

    #[inline]
    pub fn logit(&self, u: usize, v: usize) -> f64 {
        self.logits[u * self.n + v]
    }
}

/// Batch statistics observed in a train-mode pass, per layer:
/// `(node mean, node unbiased var, edge mean, edge unbiased var)`.
#[derive(Debug, Clone)]
pub struct RunningStats<F> {
    pub layers: Vec<[Array1<F>; 4]>,
}

#[derive(Debug, Clone)]
pub(crate) struct BnCache<F> {
    pub xhat: Array2<F>,
    pub inv_std: Array1<F>,
    /// Whether the normalization used batch statistics.
    pub batch_stats: bool,
    /// Post-norm, pre-ReLU activations.
    pub out: Array2<F>,
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache<F> {
    pub sig: Array2<F>,
    pub g: Array2<F>,
    pub node: BnCache<F>,
    pub edge: BnCache<F>,
}

#[derive(Debug, Clone)]
pub(crate) struct ForwardCache<F> {
    pub nodes: Array2<F>,
    pub edges: Array2<F>,
    pub allowed: Vec<bool>,
    /// Embeddings entering layer `l` at index `l`; the last entry is the
    /// encoder output.
    pub states: Vec<EmbeddingState<F>>,
    pub layers: Vec<LayerCache<F>>,
    /// Pre-activation outputs of every decoder layer.
    pub dec_pre: Vec<Array2<F>>,
    pub tanh: Array1<F>,
}

/// Output of a batched pass.
#[derive(Debug, Clone)]
pub struct BatchForward<F> {
    pub batch: usize,
    pub n: usize,
    pub mode: Mode,
    /// `[batch, n * n]` clipped logits (masked cells at a large negative value).
    pub logits: Array2<F>,
    /// `[batch, n * n]` probabilities, normalized in double precision.
    pub probs: Array2<f64>,
    pub stats: Option<RunningStats<F>>,
    pub(crate) cache: Option<ForwardCache<F>>,
}

impl<F: Scalar> BatchForward<F> {
    pub fn distribution(&self, b: usize) -> ActionDistribution {
        ActionDistribution {
            n: self.n,
            probs: self.probs.row(b).to_vec(),
            logits: self.logits.row(b).iter().map(|v| v.to_f64().unwrap()).collect(),
        }
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }
}

impl<F: Scalar> ModelParams<F> {
    /// Blends batch statistics into the running statistics.
    pub fn update_running_stats(&mut self, stats: &RunningStats<F>) {
        let m: F = cst(BN_MOMENTUM);
        let keep = F::one() - m;
        for (layer, [nm, nv, em, ev]) in self.layers.iter_mut().zip(&stats.layers) {
            for (bn, mean, var) in [(&mut layer.node_norm, nm, nv), (&mut layer.edge_norm, em, ev)] {
                Zip::from(&mut bn.running_mean).and(mean).for_each(|r, &x| *r = keep * *r + m * x);
                Zip::from(&mut bn.running_var).and(var).for_each(|r, &x| *r = keep * *r + m * x);
            }
        }
    }
}

#[inline]
fn sigmoid<F: Scalar>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

#[inline]
fn relu<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        x
    } else {
        F::zero()
    }
}

/// Returns (normalized output, cache, optional (mean, unbiased var)).
fn batch_norm<F: Scalar>(x: &Array2<F>, bn: &BatchNorm<F>, mode: Mode) -> (BnCache<F>, Option<(Array1<F>, Array1<F>)>) {
    let rows = x.nrows();
    let eps: F = cst(BN_EPS);
    let (mean, var, stats) = match mode {
        Mode::Train => {
            let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
            let mut var = Array1::<F>::zeros(x.ncols());
            for row in x.rows() {
                Zip::from(&mut var).and(&row).and(&mean).for_each(|v, &a, &m| {
                    let c = a - m;
                    *v += c * c;
                });
            }
            let biased = var.mapv(|v| v / cst(rows as f64));
            let unbiased = if rows > 1 { var.mapv(|v| v / cst((rows - 1) as f64)) } else { biased.clone() };
            (mean.clone(), biased, Some((mean, unbiased)))
        }
        Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone(), None),
    };
    let inv_std = var.mapv(|v| F::one() / (v + eps).sqrt());
    let mut xhat = x.clone();
    for mut row in xhat.rows_mut() {
        Zip::from(&mut row).and(&mean).and(&inv_std).for_each(|v, &m, &s| *v = (*v - m) * s);
    }
    let mut out = xhat.clone();
    for mut row in out.rows_mut() {
        Zip::from(&mut row).and(&bn.gamma).and(&bn.beta).for_each(|v, &g, &b| *v = g * *v + b);
    }
    (BnCache { xhat, inv_std, batch_stats: mode == Mode::Train, out }, stats)
}

fn check_finite<F: Scalar>(a: &Array2<F>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite value in {what}")))
    }
}

/// Input projections: `h_i = n_i V_h + U_h`, `e_ij = x_ij V_e + U_e`.
pub fn embed<F: Scalar>(params: &ModelParams<F>, input: &StateBatch<F>) -> Result<EmbeddingState<F>> {
    let k = params.hyper.node_arity;
    if input.nodes.ncols() != k || input.nodes.nrows() != input.batch * input.n {
        return Err(Error::arg(format!(
            "node features are {:?}, expected [{}, {k}]",
            input.nodes.shape(),
            input.batch * input.n
        )));
    }
    if input.edges.ncols() != 2 || input.edges.nrows() != input.batch * input.n * input.n {
        return Err(Error::arg(format!(
            "edge features are {:?}, expected [{}, 2]",
            input.edges.shape(),
            input.batch * input.n * input.n
        )));
    }
    let h = input.nodes.dot(&params.node_proj.weight) + &params.node_proj.bias;
    let e = input.edges.dot(&params.edge_proj.weight) + &params.edge_proj.bias;
    Ok(EmbeddingState { batch: input.batch, n: input.n, h, e })
}

fn layer_forward<F: Scalar>(
    params: &ModelParams<F>,
    l: usize,
    state: &EmbeddingState<F>,
    mode: Mode,
) -> (EmbeddingState<F>, LayerCache<F>, Option<[Array1<F>; 4]>) {
    let lp = &params.layers[l];
    let (batch, n) = (state.batch, state.n);
    let d = params.hyper.d;
    let h = &state.h;
    let e = &state.e;

    // node update: h W1 + sum_j sigmoid(e_ij) * (h_j W2)
    let g = h.dot(&lp.w2);
    let sig = e.mapv(sigmoid);
    let mut pre_node = h.dot(&lp.w1);
    {
        let sig_s = sig.as_slice().expect("standard layout");
        let g_s = g.as_slice().expect("standard layout");
        let p_s = pre_node.as_slice_mut().expect("standard layout");
        for b in 0..batch {
            for i in 0..n {
                let row = &mut p_s[(b * n + i) * d..(b * n + i + 1) * d];
                for j in 0..n {
                    let sr = &sig_s[((b * n + i) * n + j) * d..((b * n + i) * n + j + 1) * d];
                    let gr = &g_s[(b * n + j) * d..(b * n + j + 1) * d];
                    for c in 0..d {
                        row[c] += sr[c] * gr[c];
                    }
                }
            }
        }
    }
    let (node_cache, node_stats) = batch_norm(&pre_node, &lp.node_norm, mode);
    let mut h_next = h.clone();
    Zip::from(&mut h_next).and(&node_cache.out).for_each(|v, &y| *v += relu(y));

    // edge update: e W3 + h_i W4 + h_j W5
    let mut pre_edge = e.dot(&lp.w3);
    let a4 = h.dot(&lp.w4);
    let a5 = h.dot(&lp.w5);
    {
        let a4_s = a4.as_slice().expect("standard layout");
        let a5_s = a5.as_slice().expect("standard layout");
        let q_s = pre_edge.as_slice_mut().expect("standard layout");
        for b in 0..batch {
            for i in 0..n {
                let ri = &a4_s[(b * n + i) * d..(b * n + i + 1) * d];
                for j in 0..n {
                    let rj = &a5_s[(b * n + j) * d..(b * n + j + 1) * d];
                    let q = &mut q_s[((b * n + i) * n + j) * d..((b * n + i) * n + j + 1) * d];
                    for c in 0..d {
                        q[c] += ri[c] + rj[c];
                    }
                }
            }
        }
    }
    let (edge_cache, edge_stats) = batch_norm(&pre_edge, &lp.edge_norm, mode);
    let mut e_next = e.clone();
    Zip::from(&mut e_next).and(&edge_cache.out).for_each(|v, &z| *v += relu(z));

    let stats = match (node_stats, edge_stats) {
        (Some((nm, nv)), Some((em, ev))) => Some([nm, nv, em, ev]),
        _ => None,
    };
    (
        EmbeddingState { batch, n, h: h_next, e: e_next },
        LayerCache { sig, g, node: node_cache, edge: edge_cache },
        stats,
    )
}

/// One residual message-passing layer.
pub fn gnn_layer<F: Scalar>(
    params: &ModelParams<F>,
    layer: usize,
    state: &EmbeddingState<F>,
    mode: Mode,
) -> Result<EmbeddingState<F>> {
    if layer >= params.layers.len() {
        return Err(Error::arg(format!("layer {layer} out of range ({} layers)", params.layers.len())));
    }
    Ok(layer_forward(params, layer, state, mode).0)
}

const DECODER_CHUNK: usize = 16 * 1024;

/// Decoder MLP on edge rows; returns pre-activation outputs of every layer
/// (the last one being the raw score column).
fn decoder_forward<F: Scalar>(params: &ModelParams<F>, e: &Array2<F>) -> Vec<Array2<F>> {
    let mut pre = Vec::with_capacity(params.decoder.len());
    let mut act: Option<Array2<F>> = None;
    for (k, dense) in params.decoder.iter().enumerate() {
        let input = act.as_ref().unwrap_or(e);
        let z = input.dot(&dense.weight) + &dense.bias;
        if k + 1 < params.decoder.len() {
            act = Some(z.mapv(relu));
        }
        pre.push(z);
    }
    pre
}

/// Raw decoder scores, processed in row chunks to bound memory.
fn decoder_scores<F: Scalar>(params: &ModelParams<F>, e: &Array2<F>) -> Array1<F> {
    let rows = e.nrows();
    let mut out = Array1::zeros(rows);
    let mut start = 0;
    while start < rows {
        let end = (start + DECODER_CHUNK).min(rows);
        let chunk = e.slice(s![start..end, ..]).to_owned();
        let pre = decoder_forward(params, &chunk);
        out.slice_mut(s![start..end]).assign(&pre.last().unwrap().column(0));
        start = end;
    }
    out
}

/// Clipped, masked logits and softmax per state.
fn logits_and_probs<F: Scalar>(
    clip: f64,
    raw: &Array1<F>,
    allowed: &[bool],
    batch: usize,
    n: usize,
) -> (Array1<F>, Array2<F>, Array2<f64>) {
    let cells = n * n;
    let tanh = raw.mapv(|v| v.tanh());
    let mut logits = Array2::<F>::zeros((batch, cells));
    let mut probs = Array2::<f64>::zeros((batch, cells));
    let c: F = cst(clip);
    for b in 0..batch {
        let mut row = logits.row_mut(b);
        for k in 0..cells {
            row[k] = if allowed[b * cells + k] { c * tanh[b * cells + k] } else { cst(MASKED_LOGIT) };
        }
        let max = row.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.to_f64().unwrap()));
        let mut prow = probs.row_mut(b);
        let mut total = 0.0;
        for k in 0..cells {
            let p = if allowed[b * cells + k] { (row[k].to_f64().unwrap() - max).exp() } else { 0.0 };
            prow[k] = p;
            total += p;
        }
        prow.mapv_inplace(|p| p / total);
    }
    (tanh, logits, probs)
}

/// Decoder on final edge embeddings: one distribution per state.
pub fn decode<F: Scalar>(params: &ModelParams<F>, state: &EmbeddingState<F>, allowed: &[bool]) -> Vec<ActionDistribution> {
    let raw = decoder_scores(params, &state.e);
    let (_, logits, probs) = logits_and_probs(params.hyper.clip, &raw, allowed, state.batch, state.n);
    (0..state.batch)
        .map(|b| ActionDistribution {
            n: state.n,
            probs: probs.row(b).to_vec(),
            logits: logits.row(b).iter().map(|v| v.to_f64().unwrap()).collect(),
        })
        .collect()
}

/// Full pass over a batch. With `retain`, keeps everything the reverse
/// pass needs.
pub fn forward_batch<F: Scalar>(
    params: &ModelParams<F>,
    input: &StateBatch<F>,
    mode: Mode,
    retain: bool,
) -> Result<BatchForward<F>> {
    let (batch, n) = (input.batch, input.n);
    if input.allowed.len() != batch * n * n {
        return Err(Error::arg("mask length does not match the batch"));
    }
    let mut state = embed(params, input)?;
    check_finite(&state.h, "node projection")?;
    check_finite(&state.e, "edge projection")?;
    let mut states = Vec::new();
    let mut caches = Vec::new();
    let mut stats = Vec::new();
    for l in 0..params.layers.len() {
        let (next, cache, st) = layer_forward(params, l, &state, mode);
        check_finite(&next.h, &format!("layer {l} node embeddings"))?;
        check_finite(&next.e, &format!("layer {l} edge embeddings"))?;
        if retain {
            states.push(std::mem::replace(&mut state, next));
            caches.push(cache);
        } else {
            state = next;
        }
        if let Some(st) = st {
            stats.push(st);
        }
    }
    let (raw, dec_pre) = if retain {
        let pre = decoder_forward(params, &state.e);
        (pre.last().unwrap().column(0).to_owned(), pre)
    } else {
        (decoder_scores(params, &state.e), Vec::new())
    };
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite value in decoder output".into()));
    }
    let (tanh, logits, probs) = logits_and_probs(params.hyper.clip, &raw, &input.allowed, batch, n);
    let cache = retain.then(|| {
        states.push(state);
        ForwardCache {
            nodes: input.nodes.clone(),
            edges: input.edges.clone(),
            allowed: input.allowed.clone(),
            states,
            layers: caches,
            dec_pre,
            tanh,
        }
    });
    Ok(BatchForward {
        batch,
        n,
        mode,
        logits,
        probs,
        stats: (mode == Mode::Train).then_some(RunningStats { layers: stats }),
        cache,
    })
}

/// Distribution for a single state.
pub fn forward<F: Scalar>(
    params: &ModelParams<F>,
    inst: &Instance,
    sol: &Solution,
    op: OperatorKind,
    mask: MaskPolicy,
    mode: Mode,
) -> Result<ActionDistribution> {
    if inst.problem() != params.hyper.problem {
        return Err(Error::arg(format!(
            "model was built for {} but the instance is {}",
            params.hyper.problem,
            inst.problem()
        )));
    }
    let input = StateBatch::<F>::build(&[(inst, sol)], op, mask)?;
    Ok(forward_batch(params, &input, mode, false)?.distribution(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, relabel_solution, ProblemKind, RngSeed};
    use crate::model::params::Hyper;
    use rand::seq::SliceRandom;

    fn toy(problem: ProblemKind, d: usize, layers: usize) -> ModelParams<f64> {
        ModelParams::init(Hyper::new(d, layers, problem), RngSeed(17))
    }

    #[test]
    fn probabilities_normalized_and_diagonal_zero() {
        let p = toy(ProblemKind::Prp, 8, 2);
        let inst = generate(ProblemKind::Prp, 6, RngSeed(1)).unwrap();
        let sol = inst.random_solution(&mut RngSeed(2).rng());
        let dist = forward(&p, &inst, &sol, OperatorKind::Insert, MaskPolicy::Invalid, Mode::Eval).unwrap();
        let total: f64 = dist.probs.iter().sum();
        assert!((total - 1.0).abs() <= 1e-6);
        for i in 0..6 {
            assert_eq!(dist.p(i, i), 0.0);
        }
        for i in 0..6 {
            for j in 0..6 {
                if i != j {
                    assert!(dist.logit(i, j).abs() <= 10.0);
                }
            }
        }
    }

    #[test]
    fn uniform_logits_give_uniform_probabilities() {
        let mut p = toy(ProblemKind::Prp, 4, 1);
        // zero the last decoder layer: every raw score becomes the same bias
        p.decoder[3].weight.fill(0.0);
        let inst = generate(ProblemKind::Prp, 5, RngSeed(1)).unwrap();
        let sol = inst.random_solution(&mut RngSeed(2).rng());
        let dist = forward(&p, &inst, &sol, OperatorKind::Insert, MaskPolicy::Invalid, Mode::Eval).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 0.0 } else { 1.0 / 20.0 };
                assert!((dist.p(i, j) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_matches_scalar_oracle() {
        let logits = Array1::from_vec(vec![0.3f64, -1.2, 2.0, 0.0, 0.5, 1.5, -0.7, 0.1, 0.9]);
        // raw scores chosen so that clip * tanh(raw) reproduces no particular value;
        // the oracle applies the same clip explicitly
        let allowed: Vec<bool> = (0..9).map(|c| c / 3 != c % 3).collect();
        let (_, lg, probs) = logits_and_probs(10.0, &logits, &allowed, 1, 3);
        let mut expect = [0.0f64; 9];
        let mut z = 0.0;
        for c in 0..9 {
            if allowed[c] {
                let u = 10.0 * logits[c].tanh();
                assert_eq!(lg[[0, c]], u);
                expect[c] = u.exp();
                z += expect[c];
            }
        }
        for c in 0..9 {
            assert!((probs[[0, c]] - expect[c] / z).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_forward_is_deterministic_and_batch_invariant() {
        let p = toy(ProblemKind::Gpp, 8, 2).cast::<f32>();
        let insts: Vec<_> = (0..3).map(|s| generate(ProblemKind::Gpp, 6, RngSeed(s)).unwrap()).collect();
        let sols: Vec<_> = insts.iter().map(|i| i.random_solution(&mut RngSeed(9).rng())).collect();
        let states: Vec<_> = insts.iter().zip(&sols).collect();
        let input = StateBatch::<f32>::build(&states, OperatorKind::GppSwap, MaskPolicy::Invalid).unwrap();
        let batch = forward_batch(&p, &input, Mode::Eval, false).unwrap();
        for (b, (inst, sol)) in states.iter().enumerate() {
            let one = forward(&p, inst, sol, OperatorKind::GppSwap, MaskPolicy::Invalid, Mode::Eval).unwrap();
            let again = forward(&p, inst, sol, OperatorKind::GppSwap, MaskPolicy::Invalid, Mode::Eval).unwrap();
            assert_eq!(one, again);
            assert_eq!(one, batch.distribution(b));
        }
    }

    #[test]
    fn zero_weights_make_layers_pure_residual() {
        let mut p = toy(ProblemKind::Prp, 6, 1);
        let l = &mut p.layers[0];
        for w in [&mut l.w1, &mut l.w2, &mut l.w3, &mut l.w4, &mut l.w5] {
            w.fill(0.0);
        }
        let inst = generate(ProblemKind::Prp, 5, RngSeed(1)).unwrap();
        let sol = inst.random_solution(&mut RngSeed(2).rng());
        let input = StateBatch::<f64>::single(&inst, &sol).unwrap();
        let s0 = embed(&p, &input).unwrap();
        for mode in [Mode::Train, Mode::Eval] {
            let s1 = gnn_layer(&p, 0, &s0, mode).unwrap();
            assert_eq!(s0, s1);
        }
    }

    #[test]
    fn embed_special_cases() {
        let mut p = toy(ProblemKind::Prp, 4, 1);
        p.node_proj.weight.fill(0.0);
        p.edge_proj.bias.fill(0.0);
        let n = 3;
        let input = StateBatch::from_features(Array2::ones((n, 1)), ndarray::Array3::zeros((n, n, 2)));
        let s = embed(&p, &input).unwrap();
        for row in s.h.rows() {
            assert_eq!(row, p.node_proj.bias);
        }
        assert!(s.e.iter().all(|&v| v == 0.0));
        let bad = StateBatch::from_features(Array2::ones((n, 2)), ndarray::Array3::zeros((n, n, 2)));
        assert!(matches!(embed(&p, &bad), Err(Error::Argument(_))));
    }

    #[test]
    fn relabeling_permutes_the_distribution() {
        for (problem, op) in [
            (ProblemKind::Prp, OperatorKind::Insert),
            (ProblemKind::Tsp, OperatorKind::TwoOpt),
            (ProblemKind::Gpp, OperatorKind::GppSwap),
        ] {
            let p = toy(problem, 8, 2);
            let inst = generate(problem, 6, RngSeed(5)).unwrap();
            let sol = inst.random_solution(&mut RngSeed(6).rng());
            let mut pi: Vec<usize> = (0..6).collect();
            pi.shuffle(&mut RngSeed(7).rng());
            let inst2 = inst.relabel(&pi);
            let sol2 = relabel_solution(&sol, &pi);
            let a = forward(&p, &inst, &sol, op, MaskPolicy::Invalid, Mode::Eval).unwrap();
            let b = forward(&p, &inst2, &sol2, op, MaskPolicy::Invalid, Mode::Eval).unwrap();
            for u in 0..6 {
                for v in 0..6 {
                    let (x, y) = (a.p(u, v), b.p(pi[u], pi[v]));
                    assert!((x - y).abs() <= 1e-5 * x.abs().max(1e-12), "{problem} {u} {v}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn running_stats_update() {
        let mut p = toy(ProblemKind::Prp, 4, 2);
        let inst = generate(ProblemKind::Prp, 5, RngSeed(1)).unwrap();
        let sol = inst.random_solution(&mut RngSeed(2).rng());
        let input = StateBatch::<f64>::single(&inst, &sol).unwrap();
        let out = forward_batch(&p, &input, Mode::Train, false).unwrap();
        let stats = out.stats.unwrap();
        let before = p.layers[1].edge_norm.running_mean.clone();
        p.update_running_stats(&stats);
        let expect = before.mapv(|v| 0.9 * v) + stats.layers[1][2].mapv(|v| 0.1 * v);
        assert_eq!(p.layers[1].edge_norm.running_mean, expect);
    }
}
