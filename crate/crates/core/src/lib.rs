//! Selective-scan spatiotemporal token selection.
//!
//! A long grid of video tokens `(T, h, w, d)` is compressed to a short grid of
//! query tokens by pooling-initialised queries that are refined with a
//! selective state-space scan over the combined token sequence. The crate also
//! carries the comparison compressors (pooling, self-attention, perceiver,
//! vanilla pass-through) and the experiment harness used to check the
//! mechanism: oracle equivalence, gradients, cost curves and needle retention.

pub mod baselines;
pub mod error;
pub mod grid;
pub mod harness;
pub mod meter;
pub mod real;
pub mod rng;
pub mod selector;
pub mod ssm;
pub mod tensor_io;

pub use error::{Error, Result};
pub use grid::{Grid, QueryGrid, Seq, TokenGrid};
pub use real::Real;
pub use rng::Rng;
