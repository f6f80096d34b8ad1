use super::params::{derive_params, SsmParams};
use crate::error::{Error, Result};
use crate::grid::Seq;
use crate::real::{sigmoid, Real};

/// Reverse-mode gradients of `⟨dy, scan(x, p)⟩`.
///
/// Parameter gradients mirror the [`SsmParams`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SsmGrads<R> {
    pub dx: Seq<R>,
    pub a_diag: Vec<R>,
    pub w_b: Vec<R>,
    pub w_c: Vec<R>,
    pub w_delta: Vec<R>,
    pub delta_bias: R,
    pub d_skip: Vec<R>,
}

impl<R: Real> SsmGrads<R> {
    /// Parameter gradients in [`SsmParams::to_flat`] order.
    pub fn param_flat(&self) -> Vec<R> {
        let mut v = Vec::new();
        v.extend_from_slice(&self.a_diag);
        v.extend_from_slice(&self.w_b);
        v.extend_from_slice(&self.w_c);
        v.extend_from_slice(&self.w_delta);
        v.push(self.delta_bias);
        v.extend_from_slice(&self.d_skip);
        v
    }
}

/// Exact gradient via the adjoint recurrence `g[k] = C[k]·dy[k] + a̅[k+1]·g[k+1]`.
pub fn scan_vjp<R: Real>(x: &Seq<R>, p: &SsmParams<R>, dy: &Seq<R>) -> Result<SsmGrads<R>> {
    let tp = derive_params(x, p)?;
    if dy.len() != x.len() || dy.dim() != x.dim() {
        return Err(Error::shape(format!(
            "cotangent is {}x{}, scan output is {}x{}",
            dy.len(),
            dy.dim(),
            x.len(),
            x.dim()
        )));
    }
    dy.ensure_finite()?;
    let (len, d, n) = (x.len(), p.channels, p.state);
    let dn = d * n;

    // Forward pass keeping every state.
    let mut states = vec![R::zero(); len * dn];
    let mut h = vec![R::zero(); dn];
    for k in 0..len {
        let (xk, delta, b) = (x.row(k), tp.delta_at(k), tp.b_at(k));
        for ch in 0..d {
            for s in 0..n {
                let i = ch * n + s;
                let abar = (delta[ch] * p.a_diag[i]).exp();
                h[i] = abar * h[i] + (delta[ch] * b[s]) * xk[ch];
            }
        }
        states[k * dn..(k + 1) * dn].copy_from_slice(&h);
    }

    let zero = R::zero();
    let mut grads = SsmGrads {
        dx: Seq::zeros(len, d),
        a_diag: vec![zero; dn],
        w_b: vec![zero; dn],
        w_c: vec![zero; dn],
        w_delta: vec![zero; d],
        delta_bias: zero,
        d_skip: vec![zero; d],
    };
    let mut g = vec![zero; dn];
    let mut d_b = vec![zero; n];
    let mut d_c = vec![zero; n];

    for k in (0..len).rev() {
        let (xk, dyk) = (x.row(k), dy.row(k));
        let (delta, b, c) = (tp.delta_at(k), tp.b_at(k), tp.c_at(k));
        let hk = &states[k * dn..(k + 1) * dn];
        let h_prev = (k > 0).then(|| &states[(k - 1) * dn..k * dn]);

        d_b.iter_mut().for_each(|v| *v = zero);
        for (s, dc) in d_c.iter_mut().enumerate() {
            *dc = (0..d).fold(zero, |acc, ch| acc + dyk[ch] * hk[ch * n + s]);
        }

        let dxk = grads.dx.row_mut(k);
        for ch in 0..d {
            dxk[ch] = dyk[ch] * p.d_skip[ch];
            grads.d_skip[ch] = grads.d_skip[ch] + dyk[ch] * xk[ch];
            let dl = delta[ch];
            let mut d_delta = zero;
            for s in 0..n {
                let i = ch * n + s;
                let a = p.a_diag[i];
                let abar = (dl * a).exp();
                let gi = g[i] + dyk[ch] * c[s];
                let hp = h_prev.map_or(zero, |hp| hp[i]);
                let d_abar = gi * hp;
                let d_bbar = gi * xk[ch];
                dxk[ch] = dxk[ch] + gi * (dl * b[s]);
                d_delta = d_delta + d_abar * abar * a + d_bbar * b[s];
                grads.a_diag[i] = grads.a_diag[i] + d_abar * abar * dl;
                d_b[s] = d_b[s] + d_bbar * dl;
                g[i] = gi * abar;
            }
            let z = p.w_delta[ch] * xk[ch] + p.delta_bias;
            let dz = d_delta * sigmoid(z);
            grads.w_delta[ch] = grads.w_delta[ch] + dz * xk[ch];
            grads.delta_bias = grads.delta_bias + dz;
            dxk[ch] = dxk[ch] + dz * p.w_delta[ch];
        }
        for ch in 0..d {
            for s in 0..n {
                let i = ch * n + s;
                grads.w_b[i] = grads.w_b[i] + d_b[s] * xk[ch];
                grads.w_c[i] = grads.w_c[i] + d_c[s] * xk[ch];
                dxk[ch] = dxk[ch] + d_b[s] * p.w_b[i] + d_c[s] * p.w_c[i];
            }
        }
    }
    Ok(grads)
}
