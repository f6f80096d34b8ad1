use rayon::prelude::*;

use super::params::SsmParams;
use crate::error::{Error, Result};
use crate::grid::Seq;
use crate::meter::BufferMeter;
use crate::real::Real;

pub const DEFAULT_CHUNK: usize = 256;

/// Blockwise scan.
///
/// Each token applies the affine map `h ↦ a̅·h + b̅·x`. Composition of such maps
/// is associative, so every chunk is first reduced to one map (its decay
/// product and its end state from a zero start), the chunk carries are chained
/// left to right, and finally each chunk is replayed from its true carry-in.
/// Chunks are independent in the first and last pass and run in parallel.
pub fn scan_chunked<R: Real>(x: &Seq<R>, p: &SsmParams<R>, chunk_len: usize) -> Result<Seq<R>> {
    scan_chunked_metered(x, p, chunk_len, &mut BufferMeter::new())
}

pub fn scan_chunked_metered<R: Real>(
    x: &Seq<R>,
    p: &SsmParams<R>,
    chunk_len: usize,
    meter: &mut BufferMeter,
) -> Result<Seq<R>> {
    if chunk_len == 0 {
        return Err(Error::invalid("chunk length must be at least 1"));
    }
    p.check_input(x)?;
    let (len, d, n) = (x.len(), p.channels, p.state);
    let dn = d * n;
    let n_chunks = len.div_ceil(chunk_len);
    meter.declare("scan output", len * d, R::BYTES)?;
    meter.declare("chunk summaries", 2 * n_chunks * dn, R::BYTES)?;

    let summaries: Vec<ChunkMap<R>> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let rows = ci * chunk_len..((ci + 1) * chunk_len).min(len);
            reduce_chunk(x, p, rows)
        })
        .collect();

    let mut carries = Vec::with_capacity(n_chunks);
    let mut carry = vec![R::zero(); dn];
    for map in &summaries {
        carries.push(carry.clone());
        for ((h, &decay), &end) in carry.iter_mut().zip(&map.decay).zip(&map.end) {
            *h = decay * *h + end;
        }
    }

    let mut out = Seq::zeros(len, d);
    out.data_mut()
        .par_chunks_mut(chunk_len * d)
        .zip(carries.into_par_iter())
        .enumerate()
        .for_each(|(ci, (out_rows, carry_in))| {
            replay_chunk(x, p, ci * chunk_len, carry_in, out_rows);
        });
    Ok(out)
}

struct ChunkMap<R> {
    decay: Vec<R>,
    end: Vec<R>,
}

struct Scratch<R> {
    delta: Vec<R>,
    b: Vec<R>,
    c: Vec<R>,
}

impl<R: Real> Scratch<R> {
    fn new(d: usize, n: usize) -> Self {
        Self {
            delta: vec![R::zero(); d],
            b: vec![R::zero(); n],
            c: vec![R::zero(); n],
        }
    }
}

fn reduce_chunk<R: Real>(
    x: &Seq<R>,
    p: &SsmParams<R>,
    rows: std::ops::Range<usize>,
) -> ChunkMap<R> {
    let (d, n) = (p.channels, p.state);
    let mut decay = vec![R::one(); d * n];
    let mut end = vec![R::zero(); d * n];
    let mut s = Scratch::new(d, n);
    for k in rows {
        let xk = x.row(k);
        p.token_params(xk, &mut s.delta, &mut s.b, &mut s.c);
        for ch in 0..d {
            let dl = s.delta[ch];
            for st in 0..n {
                let i = ch * n + st;
                let abar = (dl * p.a_diag[i]).exp();
                decay[i] = decay[i] * abar;
                end[i] = abar * end[i] + (dl * s.b[st]) * xk[ch];
            }
        }
    }
    ChunkMap { decay, end }
}

fn replay_chunk<R: Real>(
    x: &Seq<R>,
    p: &SsmParams<R>,
    first: usize,
    mut h: Vec<R>,
    out_rows: &mut [R],
) {
    let (d, n) = (p.channels, p.state);
    let mut s = Scratch::new(d, n);
    for (offset, yk) in out_rows.chunks_exact_mut(d).enumerate() {
        let xk = x.row(first + offset);
        p.token_params(xk, &mut s.delta, &mut s.b, &mut s.c);
        for ch in 0..d {
            let dl = s.delta[ch];
            let mut acc = R::zero();
            for st in 0..n {
                let i = ch * n + st;
                let abar = (dl * p.a_diag[i]).exp();
                h[i] = abar * h[i] + (dl * s.b[st]) * xk[ch];
                acc = acc + s.c[st] * h[i];
            }
            yk[ch] = acc + p.d_skip[ch] * xk[ch];
        }
    }
}
