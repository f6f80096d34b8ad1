//! Comparison compressors: pooling, full self-attention, perceiver
//! cross-attention and the uncompressed pass-through.
//!
//! All attention baselines are a single head and a single layer with no
//! positional encodings.

mod attention;
mod perceiver;

pub use attention::{attention_compress, attention_compress_metered, self_attention_weights};
pub use perceiver::{
    cross_attend, perceiver_compress, perceiver_compress_metered, perceiver_weights,
};

use crate::error::{Error, Result};
use crate::grid::{QueryGrid, Seq, TokenGrid};
use crate::meter::BufferMeter;
use crate::real::Real;
use crate::rng::Rng;
use crate::selector::adaptive_pool3d_metered;

/// Single-head projections, applied as row vector times matrix (`x·W`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams<R> {
    pub channels: usize,
    pub w_q: Vec<R>,
    pub w_k: Vec<R>,
    pub w_v: Vec<R>,
    pub w_o: Vec<R>,
    /// Perceiver latents, `latent_count × channels`.
    pub latents: Vec<R>,
    pub latent_count: usize,
    pub seed: u64,
}

impl<R: Real> AttentionParams<R> {
    pub fn init(channels: usize, latent_count: usize, seed: u64) -> Self {
        let root = Rng::new(seed);
        let scale = 1.0 / (channels as f64).sqrt();
        let mat = |stream: u64| -> Vec<R> {
            let mut rng = root.split(stream);
            (0..channels * channels)
                .map(|_| R::of_f64(scale * rng.normal()))
                .collect()
        };
        let mut lat_rng = root.split(4);
        Self {
            channels,
            w_q: mat(0),
            w_k: mat(1),
            w_v: mat(2),
            w_o: mat(3),
            latents: (0..latent_count * channels)
                .map(|_| R::of_f64(lat_rng.normal()))
                .collect(),
            latent_count,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dd = self.channels * self.channels;
        if self.channels == 0 {
            return Err(Error::shape("attention channels must be positive"));
        }
        for (name, m) in [
            ("w_q", &self.w_q),
            ("w_k", &self.w_k),
            ("w_v", &self.w_v),
            ("w_o", &self.w_o),
        ] {
            if m.len() != dd {
                return Err(Error::shape(format!(
                    "{name} has {} entries, expected {dd}",
                    m.len()
                )));
            }
        }
        if self.latents.len() != self.latent_count * self.channels {
            return Err(Error::shape(
                "latent block does not match latent_count × channels",
            ));
        }
        Ok(())
    }

    pub fn latents(&self) -> Result<Seq<R>> {
        Seq::new(self.latent_count, self.channels, self.latents.clone())
    }
}

/// `x·W` for every row of `x`, with `W` a `d×d` row-major matrix.
pub(crate) fn project<R: Real>(x: &Seq<R>, w: &[R]) -> Seq<R> {
    let d = x.dim();
    let mut out = Seq::zeros(x.len(), d);
    for (src, dst) in x.rows().zip(out.data_mut().chunks_exact_mut(d)) {
        for (i, &xi) in src.iter().enumerate() {
            let wrow = &w[i * d..(i + 1) * d];
            for (o, &wij) in dst.iter_mut().zip(wrow) {
                *o = *o + xi * wij;
            }
        }
    }
    out
}

/// In-place max-subtracted softmax.
pub(crate) fn softmax_in_place<R: Real>(row: &mut [R]) {
    let max = row.iter().copied().fold(R::neg_infinity(), R::max);
    let mut sum = R::zero();
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum = sum + *v;
    }
    for v in row.iter_mut() {
        *v = *v / sum;
    }
}

/// Pooling baseline: the selector's query initialisation with no scan.
pub fn pool_compress<R: Real>(
    z: &TokenGrid<R>,
    frames: usize,
    height: usize,
    width: usize,
) -> Result<QueryGrid<R>> {
    pool_compress_metered(z, frames, height, width, &mut BufferMeter::new())
}

pub fn pool_compress_metered<R: Real>(
    z: &TokenGrid<R>,
    frames: usize,
    height: usize,
    width: usize,
    meter: &mut BufferMeter,
) -> Result<QueryGrid<R>> {
    adaptive_pool3d_metered(z, frames, height, width, meter)
}

/// No compression: all `L` tokens, unchanged.
pub fn vanilla_pass<R: Real>(z: &TokenGrid<R>) -> Seq<R> {
    z.flatten()
}
