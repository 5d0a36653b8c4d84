//! Edge-centric policy network.
//!
//! Node and edge features are projected to `d` dimensions, refined by `L`
//! residual message-passing layers with gated aggregation and batch norm,
//! and the final edge embeddings are turned into one logit per ordered node
//! pair by an MLP. A softmax over all `n * n` cells (diagonal masked) gives
//! the action distribution.
//!
//! Everything is generic over the float type: `f32` for training and
//! inference, `f64` for finite-difference checks.

mod backward;
mod checkpoint;
mod features;
mod forward;
mod params;
mod policy;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

pub use backward::backward;
pub use checkpoint::{load_checkpoint, load_checkpoint_expecting, save_checkpoint, CHECKPOINT_VERSION};
pub use features::{build_features, MaskPolicy, StateBatch};
pub use forward::{
    decode, embed, forward, forward_batch, gnn_layer, ActionDistribution, BatchForward, EmbeddingState,
    RunningStats,
};
pub use params::{BatchNorm, Dense, GnnLayerParams, Hyper, ModelParams, TensorRole, DECODER_WIDTHS};
pub use policy::{
    argmax_action, first_improving_action, probability_order, sample_action, ImprovingSearch, NodePair,
};

/// Float type the network computes in.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + ndarray::LinalgScalar
    + ndarray::ScalarOperand
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + Debug
    + Display
    + Default
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[inline]
pub(crate) fn cst<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("representable constant")
}

/// Batch-norm behaviour.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Normalize with the statistics of the current batch.
    Train,
    /// Normalize with the running statistics.
    Eval,
}

pub(crate) const BN_EPS: f64 = 1e-5;
pub(crate) const BN_MOMENTUM: f64 = 0.1;
/// Logit assigned to masked cells.
pub(crate) const MASKED_LOGIT: f64 = -1e9;
