use super::params::{derive_params, discretize, PerTokenParams, SsmParams};
use crate::error::{Error, Result};
use crate::grid::Seq;
use crate::real::Real;

/// Reference scan: one token at a time, state starts at zero.
pub fn scan_sequential<R: Real>(x: &Seq<R>, p: &SsmParams<R>) -> Result<Seq<R>> {
    let tp = derive_params(x, p)?;
    scan_frozen(x, &tp, p)
}

/// Runs the recurrence with `Δ`, `B`, `C` given rather than derived from `x`.
///
/// With the per-token parameters held fixed the map `x ↦ y` is linear.
pub fn scan_frozen<R: Real>(
    x: &Seq<R>,
    tp: &PerTokenParams<R>,
    p: &SsmParams<R>,
) -> Result<Seq<R>> {
    p.check_input(x)?;
    if tp.len != x.len() || tp.channels != p.channels || tp.state != p.state {
        return Err(Error::shape(format!(
            "per-token params {}x{}x{} do not match input {}x{} / state {}",
            tp.len,
            tp.channels,
            tp.state,
            x.len(),
            x.dim(),
            p.state
        )));
    }
    let (d, n) = (p.channels, p.state);
    let mut h = vec![R::zero(); d * n];
    let mut y = Seq::zeros(x.len(), d);
    for k in 0..x.len() {
        let xk = x.row(k);
        let (delta, b, c) = (tp.delta_at(k), tp.b_at(k), tp.c_at(k));
        let yk = y.row_mut(k);
        for ch in 0..d {
            let mut acc = R::zero();
            for s in 0..n {
                let (abar, bbar) = discretize(delta[ch], p.a_diag[ch * n + s], b[s])?;
                let hs = &mut h[ch * n + s];
                *hs = abar * *hs + bbar * xk[ch];
                acc = acc + c[s] * *hs;
            }
            yk[ch] = acc + p.d_skip[ch] * xk[ch];
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::ssm::SsmInit;

    #[test]
    fn zero_readout_is_pure_skip() {
        let mut rng = Rng::new(4);
        let mut p = SsmParams::<f64>::init(3, 5, SsmInit::default(), &mut rng);
        p.w_c.iter_mut().for_each(|v| *v = 0.0);
        p.d_skip = vec![0.5, -2.0, 3.0];
        let x = Seq::random(7, 3, 1.0, &mut rng);
        let y = scan_sequential(&x, &p).unwrap();
        for k in 0..7 {
            for c in 0..3 {
                assert_eq!(y.row(k)[c], p.d_skip[c] * x.row(k)[c]);
            }
        }
    }

    #[test]
    fn two_step_hand_recurrence() {
        // a̅ = 0.5, b̅ = 1, C = 1, D = 0, x = [1, 1] ⇒ h = [1, 1.5].
        let p = SsmParams {
            channels: 1,
            state: 1,
            a_diag: vec![-1.0],
            w_b: vec![0.0],
            w_c: vec![0.0],
            w_delta: vec![0.0],
            delta_bias: 0.0,
            d_skip: vec![0.0],
        };
        let ln2 = std::f64::consts::LN_2;
        let tp = PerTokenParams {
            len: 2,
            channels: 1,
            state: 1,
            delta: vec![ln2, ln2],
            b: vec![1.0 / ln2, 1.0 / ln2],
            c: vec![1.0, 1.0],
        };
        let x = Seq::new(2, 1, vec![1.0, 1.0]).unwrap();
        let y = scan_frozen(&x, &tp, &p).unwrap();
        assert!((y.row(0)[0] - 1.0).abs() < 1e-15);
        assert!((y.row(1)[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn prefix_outputs_ignore_later_inputs() {
        let mut rng = Rng::new(8);
        let p = SsmParams::<f64>::init(4, 6, SsmInit::default(), &mut rng);
        let x = Seq::random(20, 4, 1.0, &mut rng);
        let y = scan_sequential(&x, &p).unwrap();
        for j in [0usize, 5, 19] {
            let mut xp = x.clone();
            xp.row_mut(j)[1] += 3.0;
            let yp = scan_sequential(&xp, &p).unwrap();
            for i in 0..j {
                assert!(y
                    .row(i)
                    .iter()
                    .zip(yp.row(i))
                    .all(|(a, b)| a.to_bits() == b.to_bits()));
            }
            assert_ne!(y.row(j), yp.row(j));
        }
    }

    #[test]
    fn single_token_uses_zero_initial_state() {
        let mut rng = Rng::new(2);
        let p = SsmParams::<f64>::init(2, 3, SsmInit::default(), &mut rng);
        let x = Seq::random(1, 2, 1.0, &mut rng);
        let tp = derive_params(&x, &p).unwrap();
        let y = scan_sequential(&x, &p).unwrap();
        for c in 0..2 {
            let xv = x.row(0)[c];
            let expected: f64 = (0..3)
                .map(|s| tp.c[s] * tp.delta[c] * tp.b[s] * xv)
                .sum::<f64>()
                + xv;
            assert!((y.row(0)[c] - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn empty_sequence_is_empty() {
        let p = SsmParams::<f64>::init(2, 2, SsmInit::default(), &mut Rng::new(0));
        let y = scan_sequential(&Seq::zeros(0, 2), &p).unwrap();
        assert!(y.is_empty());
    }
}
