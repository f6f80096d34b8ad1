//! Selective (input-dependent) diagonal state-space scan.
//!
//! Per channel `c` and state `n`, with `Δ`, `B`, `C` derived from the token:
//!
//! ```text
//! h[k] = exp(Δ[k,c]·a[c,n]) · h[k-1] + Δ[k,c]·B[k,n] · x[k,c]
//! y[k,c] = Σ_n C[k,n]·h[k,c,n] + D[c]·x[k,c]
//! ```
//!
//! [`scan_sequential`] is the plain reference loop; [`scan_chunked`] computes
//! the same result blockwise by composing the per-token affine maps.

mod chunked;
mod params;
mod scan;
mod vjp;

pub use chunked::{scan_chunked, scan_chunked_metered, DEFAULT_CHUNK};
pub use params::{derive_params, discretize, PerTokenParams, SsmInit, SsmParams};
pub use scan::{scan_frozen, scan_sequential};
pub use vjp::{scan_vjp, SsmGrads};
