use super::{project, softmax_in_place, AttentionParams};
use crate::error::{Error, Result};
use crate::grid::{QueryGrid, Seq, TokenGrid};
use crate::meter::BufferMeter;
use crate::real::Real;
use crate::selector::{assemble, build_layout, extract, LayoutMode};

/// Self-attention baseline over `[Z; Q]`, returning the `N` query outputs.
///
/// The full `L'×L'` score matrix is materialised; that buffer is the peak the
/// meter reports and is what a byte budget trips on.
pub fn attention_compress<R: Real>(
    z: &TokenGrid<R>,
    q: &QueryGrid<R>,
    p: &AttentionParams<R>,
) -> Result<Seq<R>> {
    attention_compress_metered(z, q, p, &mut BufferMeter::new())
}

pub fn attention_compress_metered<R: Real>(
    z: &TokenGrid<R>,
    q: &QueryGrid<R>,
    p: &AttentionParams<R>,
    meter: &mut BufferMeter,
) -> Result<Seq<R>> {
    p.validate()?;
    if z.channels() != p.channels {
        return Err(Error::shape(format!(
            "tokens have {} channels, attention expects {}",
            z.channels(),
            p.channels
        )));
    }
    let layout = build_layout(z.tokens(), q.tokens(), LayoutMode::AppendEnd, 0)?;
    let seq = assemble(z, q, None, &layout)?;
    let out = self_attention(&seq, p, meter)?;
    extract(&out, &layout)
}

/// Row-stochastic `L'×L'` attention matrix for `seq` (row-major).
pub fn self_attention_weights<R: Real>(seq: &Seq<R>, p: &AttentionParams<R>) -> Result<Vec<R>> {
    p.validate()?;
    let (scores, _) = scores(seq, p, &mut BufferMeter::new())?;
    Ok(scores)
}

fn scores<R: Real>(
    seq: &Seq<R>,
    p: &AttentionParams<R>,
    meter: &mut BufferMeter,
) -> Result<(Vec<R>, Seq<R>)> {
    let (len, d) = (seq.len(), seq.dim());
    if d != p.channels {
        return Err(Error::shape(
            "sequence channels do not match attention params",
        ));
    }
    for what in ["queries", "keys", "values"] {
        meter.declare(what, len * d, R::BYTES)?;
    }
    let mut scores = meter.alloc("attention scores", len * len, R::zero())?;
    let qs = project(seq, &p.w_q);
    let ks = project(seq, &p.w_k);
    let vs = project(seq, &p.w_v);
    let scale = R::one() / R::of_f64(d as f64).sqrt();
    for (i, row) in scores.chunks_exact_mut(len.max(1)).enumerate().take(len) {
        let qi = qs.row(i);
        for (j, s) in row.iter_mut().enumerate() {
            *s = qi.iter().zip(ks.row(j)).map(|(&a, &b)| a * b).sum::<R>() * scale;
        }
        softmax_in_place(row);
    }
    Ok((scores, vs))
}

fn self_attention<R: Real>(
    seq: &Seq<R>,
    p: &AttentionParams<R>,
    meter: &mut BufferMeter,
) -> Result<Seq<R>> {
    let (len, d) = (seq.len(), seq.dim());
    let (weights, vs) = scores(seq, p, meter)?;
    let mut mixed = Seq::zeros(len, d);
    for i in 0..len {
        let w = &weights[i * len..(i + 1) * len];
        let dst = mixed.row_mut(i);
        for (j, &wij) in w.iter().enumerate() {
            for (o, &v) in dst.iter_mut().zip(vs.row(j)) {
                *o = *o + wij * v;
            }
        }
    }
    Ok(project(&mixed, &p.w_o))
}
