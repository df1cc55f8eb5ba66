//! Set-valued Q-network: a per-element encoder, a stack of multi-head
//! self-attention blocks, sum pooling and a dense decoder emitting one value
//! per discrete action. Forward and reverse passes are written out by hand.
//!
//! Reductions across set elements (pooling, softmax normalisers, attention
//! sums and weight-gradient sums) accumulate in `f64`, so single-precision
//! networks stay order-independent to within rounding of the final cast.

pub mod checkpoint;
mod config;
mod error;
mod linalg;
pub mod mlp;
mod params;
mod scalar;
mod setnet;

pub use checkpoint::Checkpoint;
pub use config::{Activation, AttentionNormalizer, NetConfig};
pub use error::{Error, Result};
pub use linalg::Rows;
pub use params::{polyak_update, DenseSlot, Gradients, Layout, NetParams, TensorSpec};
pub use scalar::Scalar;
pub use setnet::ForwardCache;
