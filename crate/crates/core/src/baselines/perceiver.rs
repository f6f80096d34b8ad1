use super::{project, softmax_in_place, AttentionParams};
use crate::error::{Error, Result};
use crate::grid::{Seq, TokenGrid};
use crate::meter::BufferMeter;
use crate::real::Real;

/// Perceiver baseline: `M` learned latents cross-attend over all `L` tokens.
///
/// Latent rows are processed one at a time through a single `L`-length score
/// buffer, so transient memory stays linear in `L`.
pub fn perceiver_compress<R: Real>(z: &TokenGrid<R>, p: &AttentionParams<R>) -> Result<Seq<R>> {
    perceiver_compress_metered(z, p, &mut BufferMeter::new())
}

pub fn perceiver_compress_metered<R: Real>(
    z: &TokenGrid<R>,
    p: &AttentionParams<R>,
    meter: &mut BufferMeter,
) -> Result<Seq<R>> {
    p.validate()?;
    if p.latent_count == 0 {
        return Err(Error::invalid("perceiver needs at least one latent"));
    }
    if z.channels() != p.channels {
        return Err(Error::shape(format!(
            "tokens have {} channels, perceiver expects {}",
            z.channels(),
            p.channels
        )));
    }
    let tokens = z.flatten();
    let queries = project(&p.latents()?, &p.w_q);
    meter.declare("latent queries", queries.len() * p.channels, R::BYTES)?;
    meter.declare("keys", tokens.len() * p.channels, R::BYTES)?;
    meter.declare("values", tokens.len() * p.channels, R::BYTES)?;
    let keys = project(&tokens, &p.w_k);
    // Output projection folded into the values keeps each output row a convex
    // combination of projected values.
    let values = project(&project(&tokens, &p.w_v), &p.w_o);
    cross_attend(&queries, &keys, &values, meter)
}

/// `softmax(q·kᵀ/√d)·v`, one query row at a time.
pub fn cross_attend<R: Real>(
    queries: &Seq<R>,
    keys: &Seq<R>,
    values: &Seq<R>,
    meter: &mut BufferMeter,
) -> Result<Seq<R>> {
    let d = queries.dim();
    if keys.dim() != d || values.dim() != d || keys.len() != values.len() {
        return Err(Error::shape("query/key/value shapes disagree"));
    }
    if keys.is_empty() {
        return Err(Error::invalid("cross attention over an empty key set"));
    }
    meter.declare("score row", keys.len(), R::BYTES)?;
    meter.declare("outputs", queries.len() * d, R::BYTES)?;
    let scale = R::one() / R::of_f64(d as f64).sqrt();
    let mut row = vec![R::zero(); keys.len()];
    let mut out = Seq::zeros(queries.len(), d);
    for (i, qi) in queries.rows().enumerate() {
        for (s, kj) in row.iter_mut().zip(keys.rows()) {
            *s = qi.iter().zip(kj).map(|(&a, &b)| a * b).sum::<R>() * scale;
        }
        softmax_in_place(&mut row);
        let dst = out.row_mut(i);
        for (&w, vj) in row.iter().zip(values.rows()) {
            for (o, &v) in dst.iter_mut().zip(vj) {
                *o = *o + w * v;
            }
        }
    }
    Ok(out)
}

/// Row-stochastic `M×L` latent-to-token attention matrix.
pub fn perceiver_weights<R: Real>(z: &TokenGrid<R>, p: &AttentionParams<R>) -> Result<Vec<R>> {
    p.validate()?;
    let tokens = z.flatten();
    let queries = project(&p.latents()?, &p.w_q);
    let keys = project(&tokens, &p.w_k);
    let scale = R::one() / R::of_f64(p.channels as f64).sqrt();
    let mut w = Vec::with_capacity(queries.len() * keys.len());
    for qi in queries.rows() {
        let mut row: Vec<R> = keys
            .rows()
            .map(|kj| qi.iter().zip(kj).map(|(&a, &b)| a * b).sum::<R>() * scale)
            .collect();
        softmax_in_place(&mut row);
        w.extend(row);
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::rng::Rng;

    #[test]
    fn identical_keys_give_mean_of_values() {
        let mut rng = Rng::new(1);
        let d = 3;
        let queries = Seq::<f64>::random(4, d, 1.0, &mut rng);
        let keys = Seq::from_rows(d, vec![vec![0.2, -0.1, 0.7]; 5]).unwrap();
        let values = Seq::random(5, d, 1.0, &mut rng);
        let out = cross_attend(&queries, &keys, &values, &mut BufferMeter::new()).unwrap();
        let mean: Vec<f64> = (0..d)
            .map(|c| values.rows().map(|r| r[c]).sum::<f64>() / 5.0)
            .collect();
        for row in out.rows() {
            for (a, b) in row.iter().zip(&mean) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn saturated_logit_selects_one_value() {
        let mut rng = Rng::new(2);
        let d = 4;
        let queries = Seq::<f64>::new(1, d, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let mut keys = Seq::random(6, d, 0.1, &mut rng);
        keys.row_mut(3).copy_from_slice(&[1e4, 0.0, 0.0, 0.0]);
        let values = Seq::random(6, d, 1.0, &mut rng);
        let out = cross_attend(&queries, &keys, &values, &mut BufferMeter::new()).unwrap();
        for (a, b) in out.row(0).iter().zip(values.row(3)) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let mut rng = Rng::new(3);
        let z = Grid::<f64>::random([2, 3, 3, 4], 2.0, &mut rng).unwrap();
        let p = AttentionParams::<f64>::init(4, 5, 9);
        let w = perceiver_weights(&z, &p).unwrap();
        assert_eq!(w.len(), 5 * 18);
        for row in w.chunks_exact(18) {
            assert!(row.iter().all(|&v| v >= 0.0));
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn output_count_and_linear_buffers() {
        let mut rng = Rng::new(4);
        let z = Grid::<f64>::random([4, 4, 4, 2], 1.0, &mut rng).unwrap();
        let p = AttentionParams::<f64>::init(2, 4, 1);
        let mut m = BufferMeter::new();
        let out = perceiver_compress_metered(&z, &p, &mut m).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(m.peak_bytes(), 64 * 2 * 8);
    }

    #[test]
    fn token_permutation_invariance() {
        let mut rng = Rng::new(5);
        let p = AttentionParams::<f64>::init(2, 2, 3);
        let z = Grid::<f64>::random([1, 1, 3, 2], 1.0, &mut rng).unwrap();
        let base = perceiver_compress(&z, &p).unwrap();
        for perm in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
            let data: Vec<f64> = perm
                .iter()
                .flat_map(|&i| z.token(0, 0, i).to_vec())
                .collect();
            let out = perceiver_compress(&Grid::new([1, 1, 3, 2], data).unwrap(), &p).unwrap();
            for (a, b) in out.data().iter().zip(base.data()) {
                assert!((a - b).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn zero_latents_rejected() {
        let z = Grid::<f64>::zeros([1, 1, 2, 2]).unwrap();
        assert!(perceiver_compress(&z, &AttentionParams::<f64>::init(2, 0, 0)).is_err());
    }
}
