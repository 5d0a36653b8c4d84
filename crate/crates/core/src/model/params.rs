use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{cst, Scalar};
use crate::instances::{ProblemKind, RngSeed};

/// Hidden widths of the decoder MLP; the first layer maps `d -> 128`.
pub const DECODER_WIDTHS: [usize; 4] = [128, 64, 32, 1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    /// Embedding width.
    pub d: usize,
    /// Number of message-passing layers.
    pub layers: usize,
    /// Tanh clipping applied to decoder logits.
    pub clip: f64,
    pub problem: ProblemKind,
    /// Width of the raw node features (2 for TSP coordinates, else 1).
    pub node_arity: usize,
}

impl Hyper {
    pub fn new(d: usize, layers: usize, problem: ProblemKind) -> Self {
        Hyper {
            d,
            layers,
            clip: 10.0,
            problem,
            node_arity: if problem == ProblemKind::Tsp { 2 } else { 1 },
        }
    }
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper::new(128, 3, ProblemKind::Prp)
    }
}

/// Affine map `x * weight + bias` with `weight` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub weight: Array2<F>,
    pub bias: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<F> {
    pub gamma: Array1<F>,
    pub beta: Array1<F>,
    pub running_mean: Array1<F>,
    pub running_var: Array1<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnLayerParams<F> {
    /// Self term of the node update.
    pub w1: Array2<F>,
    /// Neighbor message of the node update.
    pub w2: Array2<F>,
    /// Self term of the edge update.
    pub w3: Array2<F>,
    /// Source-node term of the edge update.
    pub w4: Array2<F>,
    /// Target-node term of the edge update.
    pub w5: Array2<F>,
    pub node_norm: BatchNorm<F>,
    pub edge_norm: BatchNorm<F>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorRole {
    Trainable,
    RunningStat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub hyper: Hyper,
    pub node_proj: Dense<F>,
    pub edge_proj: Dense<F>,
    pub layers: Vec<GnnLayerParams<F>>,
    pub decoder: Vec<Dense<F>>,
}

fn uniform<F: Scalar, R: Rng>(rng: &mut R, shape: (usize, usize), fan_in: usize) -> Array2<F> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_simple_fn(shape, || cst(rng.gen_range(-bound..bound)))
}

fn uniform_vec<F: Scalar, R: Rng>(rng: &mut R, len: usize, fan_in: usize) -> Array1<F> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array1::from_shape_simple_fn(len, || cst(rng.gen_range(-bound..bound)))
}

impl<F: Scalar> Dense<F> {
    fn init<R: Rng>(rng: &mut R, fan_in: usize, out: usize) -> Self {
        Dense { weight: uniform(rng, (fan_in, out), fan_in), bias: uniform_vec(rng, out, fan_in) }
    }

    fn zeros(fan_in: usize, out: usize) -> Self {
        Dense { weight: Array2::zeros((fan_in, out)), bias: Array1::zeros(out) }
    }
}

impl<F: Scalar> BatchNorm<F> {
    fn new(d: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(d),
            beta: Array1::zeros(d),
            running_mean: Array1::zeros(d),
            running_var: Array1::ones(d),
        }
    }

    fn zeros(d: usize) -> Self {
        BatchNorm {
            gamma: Array1::zeros(d),
            beta: Array1::zeros(d),
            running_mean: Array1::zeros(d),
            running_var: Array1::zeros(d),
        }
    }
}

impl<F: Scalar> ModelParams<F> {
    /// Random initialization: every weight and bias uniform on
    /// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, batch norms at identity.
    pub fn init(hyper: Hyper, seed: RngSeed) -> Self {
        assert!(hyper.d >= 1 && hyper.layers >= 1, "d and layers must be positive");
        let mut rng = seed.rng();
        let d = hyper.d;
        let node_proj = Dense::init(&mut rng, hyper.node_arity, d);
        let edge_proj = Dense::init(&mut rng, 2, d);
        let layers = (0..hyper.layers)
            .map(|_| GnnLayerParams {
                w1: uniform(&mut rng, (d, d), d),
                w2: uniform(&mut rng, (d, d), d),
                w3: uniform(&mut rng, (d, d), d),
                w4: uniform(&mut rng, (d, d), d),
                w5: uniform(&mut rng, (d, d), d),
                node_norm: BatchNorm::new(d),
                edge_norm: BatchNorm::new(d),
            })
            .collect();
        let mut decoder = Vec::with_capacity(DECODER_WIDTHS.len());
        let mut fan_in = d;
        for &w in &DECODER_WIDTHS {
            decoder.push(Dense::init(&mut rng, fan_in, w));
            fan_in = w;
        }
        ModelParams { hyper, node_proj, edge_proj, layers, decoder }
    }

    /// Same shapes, all zeros. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let h = &self.hyper;
        let d = h.d;
        let mut decoder = Vec::with_capacity(DECODER_WIDTHS.len());
        let mut fan_in = d;
        for &w in &DECODER_WIDTHS {
            decoder.push(Dense::zeros(fan_in, w));
            fan_in = w;
        }
        ModelParams {
            hyper: h.clone(),
            node_proj: Dense::zeros(h.node_arity, d),
            edge_proj: Dense::zeros(2, d),
            layers: (0..h.layers)
                .map(|_| GnnLayerParams {
                    w1: Array2::zeros((d, d)),
                    w2: Array2::zeros((d, d)),
                    w3: Array2::zeros((d, d)),
                    w4: Array2::zeros((d, d)),
                    w5: Array2::zeros((d, d)),
                    node_norm: BatchNorm::zeros(d),
                    edge_norm: BatchNorm::zeros(d),
                })
                .collect(),
            decoder,
        }
    }

    /// Every tensor in a fixed order with its name, role and shape.
    pub fn tensors(&self) -> Vec<(String, TensorRole, Vec<usize>, &[F])> {
        use TensorRole::*;
        let mut out: Vec<(String, TensorRole, Vec<usize>, &[F])> = Vec::new();
        let m = |a: &Array2<F>| a.shape().to_vec();
        out.push(("node_proj.weight".into(), Trainable, m(&self.node_proj.weight), slice2(&self.node_proj.weight)));
        out.push(("node_proj.bias".into(), Trainable, vec![self.hyper.d], slice1(&self.node_proj.bias)));
        out.push(("edge_proj.weight".into(), Trainable, m(&self.edge_proj.weight), slice2(&self.edge_proj.weight)));
        out.push(("edge_proj.bias".into(), Trainable, vec![self.hyper.d], slice1(&self.edge_proj.bias)));
        for (l, layer) in self.layers.iter().enumerate() {
            for (name, w) in [("w1", &layer.w1), ("w2", &layer.w2), ("w3", &layer.w3), ("w4", &layer.w4), ("w5", &layer.w5)]
            {
                out.push((format!("layers.{l}.{name}"), Trainable, m(w), slice2(w)));
            }
            for (prefix, bn) in [("node_norm", &layer.node_norm), ("edge_norm", &layer.edge_norm)] {
                let d = vec![bn.gamma.len()];
                out.push((format!("layers.{l}.{prefix}.gamma"), Trainable, d.clone(), slice1(&bn.gamma)));
                out.push((format!("layers.{l}.{prefix}.beta"), Trainable, d.clone(), slice1(&bn.beta)));
                out.push((format!("layers.{l}.{prefix}.running_mean"), RunningStat, d.clone(), slice1(&bn.running_mean)));
                out.push((format!("layers.{l}.{prefix}.running_var"), RunningStat, d, slice1(&bn.running_var)));
            }
        }
        for (k, dense) in self.decoder.iter().enumerate() {
            out.push((format!("decoder.{k}.weight"), Trainable, m(&dense.weight), slice2(&dense.weight)));
            out.push((format!("decoder.{k}.bias"), Trainable, vec![dense.bias.len()], slice1(&dense.bias)));
        }
        out
    }

    /// Mutable counterpart of [`ModelParams::tensors`], same order.
    pub fn tensors_mut(&mut self) -> Vec<(String, TensorRole, &mut [F])> {
        use TensorRole::*;
        let mut out: Vec<(String, TensorRole, &mut [F])> = Vec::new();
        out.push(("node_proj.weight".into(), Trainable, slice2_mut(&mut self.node_proj.weight)));
        out.push(("node_proj.bias".into(), Trainable, slice1_mut(&mut self.node_proj.bias)));
        out.push(("edge_proj.weight".into(), Trainable, slice2_mut(&mut self.edge_proj.weight)));
        out.push(("edge_proj.bias".into(), Trainable, slice1_mut(&mut self.edge_proj.bias)));
        for (l, layer) in self.layers.iter_mut().enumerate() {
            let GnnLayerParams { w1, w2, w3, w4, w5, node_norm, edge_norm } = layer;
            for (name, w) in [("w1", w1), ("w2", w2), ("w3", w3), ("w4", w4), ("w5", w5)] {
                out.push((format!("layers.{l}.{name}"), Trainable, slice2_mut(w)));
            }
            for (prefix, bn) in [("node_norm", node_norm), ("edge_norm", edge_norm)] {
                let BatchNorm { gamma, beta, running_mean, running_var } = bn;
                out.push((format!("layers.{l}.{prefix}.gamma"), Trainable, slice1_mut(gamma)));
                out.push((format!("layers.{l}.{prefix}.beta"), Trainable, slice1_mut(beta)));
                out.push((format!("layers.{l}.{prefix}.running_mean"), RunningStat, slice1_mut(running_mean)));
                out.push((format!("layers.{l}.{prefix}.running_var"), RunningStat, slice1_mut(running_var)));
            }
        }
        for (k, dense) in self.decoder.iter_mut().enumerate() {
            out.push((format!("decoder.{k}.weight"), Trainable, slice2_mut(&mut dense.weight)));
            out.push((format!("decoder.{k}.bias"), Trainable, slice1_mut(&mut dense.bias)));
        }
        out
    }

    /// Flattened trainable values, in tensor order.
    pub fn trainable_vector(&self) -> Vec<F> {
        self.tensors()
            .into_iter()
            .filter(|t| t.1 == TensorRole::Trainable)
            .flat_map(|t| t.3.iter().copied())
            .collect()
    }

    pub fn trainable_count(&self) -> usize {
        self.tensors().iter().filter(|t| t.1 == TensorRole::Trainable).map(|t| t.3.len()).sum()
    }

    /// Global L2 norm over trainable tensors, accumulated in f64.
    pub fn trainable_norm(&self) -> f64 {
        let mut acc = 0.0f64;
        for (_, role, _, data) in self.tensors() {
            if role == TensorRole::Trainable {
                for &v in data {
                    let v = v.to_f64().unwrap();
                    acc += v * v;
                }
            }
        }
        acc.sqrt()
    }

    pub fn scale_trainable(&mut self, factor: F) {
        for (_, role, data) in self.tensors_mut() {
            if role == TensorRole::Trainable {
                data.iter_mut().for_each(|v| *v *= factor);
            }
        }
    }

    /// `self += alpha * other` over trainable tensors.
    pub fn add_scaled(&mut self, other: &ModelParams<F>, alpha: F) {
        let src = other.tensors();
        for ((_, role, dst), (_, _, _, s)) in self.tensors_mut().into_iter().zip(src) {
            if role == TensorRole::Trainable {
                for (d, &v) in dst.iter_mut().zip(s) {
                    *d += alpha * v;
                }
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.3.iter().all(|v| v.is_finite()))
    }

    /// Converts every tensor to another float type.
    pub fn cast<G: Scalar>(&self) -> ModelParams<G> {
        let c2 = |a: &Array2<F>| a.mapv(|v| cst::<G>(v.to_f64().unwrap()));
        let c1 = |a: &Array1<F>| a.mapv(|v| cst::<G>(v.to_f64().unwrap()));
        let cd = |x: &Dense<F>| Dense { weight: c2(&x.weight), bias: c1(&x.bias) };
        let cb = |b: &BatchNorm<F>| BatchNorm {
            gamma: c1(&b.gamma),
            beta: c1(&b.beta),
            running_mean: c1(&b.running_mean),
            running_var: c1(&b.running_var),
        };
        ModelParams {
            hyper: self.hyper.clone(),
            node_proj: cd(&self.node_proj),
            edge_proj: cd(&self.edge_proj),
            layers: self
                .layers
                .iter()
                .map(|l| GnnLayerParams {
                    w1: c2(&l.w1),
                    w2: c2(&l.w2),
                    w3: c2(&l.w3),
                    w4: c2(&l.w4),
                    w5: c2(&l.w5),
                    node_norm: cb(&l.node_norm),
                    edge_norm: cb(&l.edge_norm),
                })
                .collect(),
            decoder: self.decoder.iter().map(cd).collect(),
        }
    }
}

fn slice2<F>(a: &Array2<F>) -> &[F] {
    a.as_slice().expect("standard layout")
}

fn slice1<F>(a: &Array1<F>) -> &[F] {
    a.as_slice().expect("standard layout")
}

fn slice2_mut<F>(a: &mut Array2<F>) -> &mut [F] {
    a.as_slice_mut().expect("standard layout")
}

fn slice1_mut<F>(a: &mut Array1<F>) -> &mut [F] {
    a.as_slice_mut().expect("standard layout")
}
