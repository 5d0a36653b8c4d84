//! Neural improvement heuristics for graph combinatorial optimization.
//!
//! An edge-centric graph neural policy scores every pair of nodes of an
//! instance given a current solution; the chosen pair parametrizes a local
//! move (insert, swap, 2-opt, ...). The crate bundles the problems (PRP/LOP,
//! TSP, balanced GPP), the move operators, the policy network with its
//! hand-written reverse pass, REINFORCE training, classical and neural
//! hill climbers, and experiment drivers.

pub mod error;
pub mod harness;
pub mod instances;
pub mod model;
pub mod operators;
pub mod search;
pub mod training;

pub use error::{Error, Result};
