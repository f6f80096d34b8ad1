use crate::error::{Error, Result};
use crate::grid::Seq;
use crate::real::Real;

/// Per-token layer normalisation over channels with affine `γ`, `β`.
pub fn layer_norm<R: Real>(seq: &Seq<R>, gamma: &[R], beta: &[R], eps: R) -> Result<Seq<R>> {
    let d = seq.dim();
    if gamma.len() != d || beta.len() != d {
        return Err(Error::shape(format!(
            "layer norm affine has {}/{} entries, sequence has {d} channels",
            gamma.len(),
            beta.len()
        )));
    }
    seq.ensure_finite()?;
    let mut out = normalize(seq, eps);
    for row in out.data_mut().chunks_exact_mut(d) {
        for ((v, &g), &b) in row.iter_mut().zip(gamma).zip(beta) {
            *v = *v * g + b;
        }
    }
    Ok(out)
}

/// The pre-affine part: zero mean, unit (population) variance per token.
pub fn normalize<R: Real>(seq: &Seq<R>, eps: R) -> Seq<R> {
    let d = seq.dim();
    let n = R::from_usize(d).expect("channel count fits");
    let mut out = seq.clone();
    for row in out.data_mut().chunks_exact_mut(d) {
        let mean = row.iter().copied().sum::<R>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<R>() / n;
        let inv = R::one() / (var + eps).sqrt();
        for v in row.iter_mut() {
            *v = (*v - mean) * inv;
        }
    }
    out
}
