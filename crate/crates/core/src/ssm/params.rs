use crate::error::{Error, Result};
use crate::grid::Seq;
use crate::real::{softplus, softplus_inverse, Real};
use crate::rng::Rng;

/// Learnable parameters of one scan direction.
///
/// Matrices are `channels × state` row-major: entry `(c, n)` at `c * state + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsmParams<R> {
    pub channels: usize,
    pub state: usize,
    /// Diagonal of the continuous state matrix; strictly negative.
    pub a_diag: Vec<R>,
    pub w_b: Vec<R>,
    pub w_c: Vec<R>,
    /// Per-channel step-size weights.
    pub w_delta: Vec<R>,
    pub delta_bias: R,
    /// Skip coefficients `D`.
    pub d_skip: Vec<R>,
}

/// Initialisation knobs for [`SsmParams::init`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsmInit {
    /// Step size produced by a zero input, i.e. `softplus(delta_bias)`.
    pub base_step: f64,
    /// Multiplier on the `1/√d` Gaussian projection scale.
    pub weight_scale: f64,
}

impl Default for SsmInit {
    fn default() -> Self {
        Self {
            base_step: 0.1,
            weight_scale: 1.0,
        }
    }
}

impl<R: Real> SsmParams<R> {
    /// `a[c,n] = -(n+1)`, unit skip, Gaussian projections scaled by `1/√d`.
    pub fn init(channels: usize, state: usize, init: SsmInit, rng: &mut Rng) -> Self {
        let scale = init.weight_scale / (channels as f64).sqrt();
        let mut gauss =
            |n: usize| -> Vec<R> { (0..n).map(|_| R::of_f64(scale * rng.normal())).collect() };
        let w_b = gauss(channels * state);
        let w_c = gauss(channels * state);
        let w_delta = gauss(channels);
        let a_diag = (0..channels)
            .flat_map(|_| (0..state).map(|n| R::of_f64(-((n + 1) as f64))))
            .collect();
        Self {
            channels,
            state,
            a_diag,
            w_b,
            w_c,
            w_delta,
            delta_bias: R::of_f64(softplus_inverse(init.base_step)),
            d_skip: vec![R::one(); channels],
        }
    }

    /// Parameters whose output path is identically zero (`C = 0`, `D = 0`).
    pub fn silenced(mut self) -> Self {
        self.w_c.iter_mut().for_each(|v| *v = R::zero());
        self.d_skip.iter_mut().for_each(|v| *v = R::zero());
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (d, n) = (self.channels, self.state);
        if d == 0 || n == 0 {
            return Err(Error::shape("ssm channels and state size must be positive"));
        }
        let checks = [
            ("a_diag", self.a_diag.len(), d * n),
            ("w_b", self.w_b.len(), d * n),
            ("w_c", self.w_c.len(), d * n),
            ("w_delta", self.w_delta.len(), d),
            ("d_skip", self.d_skip.len(), d),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::shape(format!(
                    "{name} has {got} entries, expected {want}"
                )));
            }
        }
        if let Some(i) = self.a_diag.iter().position(|&a| !(a < R::zero())) {
            return Err(Error::invalid(format!(
                "a_diag[{i}] = {} is not strictly negative",
                self.a_diag[i]
            )));
        }
        let finite = self
            .w_b
            .iter()
            .chain(&self.w_c)
            .chain(&self.w_delta)
            .chain(&self.d_skip)
            .chain(std::iter::once(&self.delta_bias))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("ssm parameters contain non-finite values"));
        }
        Ok(())
    }

    pub(crate) fn check_input(&self, x: &Seq<R>) -> Result<()> {
        self.validate()?;
        if x.dim() != self.channels {
            return Err(Error::shape(format!(
                "input has {} channels, params expect {}",
                x.dim(),
                self.channels
            )));
        }
        x.ensure_finite()
    }

    /// Number of scalar parameters in [`SsmParams::to_flat`] order.
    pub fn flat_len(&self) -> usize {
        3 * self.channels * self.state + 2 * self.channels + 1
    }

    /// All parameters as one vector: a_diag, w_b, w_c, w_delta, delta_bias, d_skip.
    pub fn to_flat(&self) -> Vec<R> {
        let mut v = Vec::with_capacity(self.flat_len());
        v.extend_from_slice(&self.a_diag);
        v.extend_from_slice(&self.w_b);
        v.extend_from_slice(&self.w_c);
        v.extend_from_slice(&self.w_delta);
        v.push(self.delta_bias);
        v.extend_from_slice(&self.d_skip);
        v
    }

    pub fn from_flat(channels: usize, state: usize, flat: &[R]) -> Result<Self> {
        let dn = channels * state;
        let want = 3 * dn + 2 * channels + 1;
        if flat.len() != want {
            return Err(Error::shape(format!(
                "flat params have {} entries, expected {want}",
                flat.len()
            )));
        }
        let (a_diag, rest) = flat.split_at(dn);
        let (w_b, rest) = rest.split_at(dn);
        let (w_c, rest) = rest.split_at(dn);
        let (w_delta, rest) = rest.split_at(channels);
        let (bias, d_skip) = rest.split_at(1);
        Ok(Self {
            channels,
            state,
            a_diag: a_diag.to_vec(),
            w_b: w_b.to_vec(),
            w_c: w_c.to_vec(),
            w_delta: w_delta.to_vec(),
            delta_bias: bias[0],
            d_skip: d_skip.to_vec(),
        })
    }

    /// Step size, input and readout vectors for a single token.
    #[inline]
    pub(crate) fn token_params(&self, x: &[R], delta: &mut [R], b: &mut [R], c: &mut [R]) {
        let n = self.state;
        for (dl, (&xv, &wd)) in delta.iter_mut().zip(x.iter().zip(&self.w_delta)) {
            *dl = softplus(wd * xv + self.delta_bias);
        }
        b.iter_mut().for_each(|v| *v = R::zero());
        c.iter_mut().for_each(|v| *v = R::zero());
        for (ch, &xv) in x.iter().enumerate() {
            let wb = &self.w_b[ch * n..(ch + 1) * n];
            let wc = &self.w_c[ch * n..(ch + 1) * n];
            for s in 0..n {
                b[s] = b[s] + wb[s] * xv;
                c[s] = c[s] + wc[s] * xv;
            }
        }
    }
}

/// Input-dependent `Δ`, `B`, `C` for every sequence position.
#[derive(Debug, Clone, PartialEq)]
pub struct PerTokenParams<R> {
    pub len: usize,
    pub channels: usize,
    pub state: usize,
    /// `len × channels`, all positive.
    pub delta: Vec<R>,
    /// `len × state`, shared by all channels.
    pub b: Vec<R>,
    /// `len × state`, shared by all channels.
    pub c: Vec<R>,
}

impl<R: Real> PerTokenParams<R> {
    pub fn delta_at(&self, k: usize) -> &[R] {
        &self.delta[k * self.channels..(k + 1) * self.channels]
    }

    pub fn b_at(&self, k: usize) -> &[R] {
        &self.b[k * self.state..(k + 1) * self.state]
    }

    pub fn c_at(&self, k: usize) -> &[R] {
        &self.c[k * self.state..(k + 1) * self.state]
    }
}

/// `B[k] = w_Bᵀ x[k]`, `C[k] = w_Cᵀ x[k]`, `Δ[k,c] = softplus(w_Δ[c]·x[k,c] + bias)`.
pub fn derive_params<R: Real>(x: &Seq<R>, p: &SsmParams<R>) -> Result<PerTokenParams<R>> {
    p.check_input(x)?;
    let (len, d, n) = (x.len(), p.channels, p.state);
    let mut out = PerTokenParams {
        len,
        channels: d,
        state: n,
        delta: vec![R::zero(); len * d],
        b: vec![R::zero(); len * n],
        c: vec![R::zero(); len * n],
    };
    for k in 0..len {
        p.token_params(
            x.row(k),
            &mut out.delta[k * d..(k + 1) * d],
            &mut out.b[k * n..(k + 1) * n],
            &mut out.c[k * n..(k + 1) * n],
        );
    }
    Ok(out)
}

/// Zero-order hold on the state, Euler on the input: `(exp(Δ·a), Δ·b)`.
pub fn discretize<R: Real>(delta: R, a: R, b: R) -> Result<(R, R)> {
    if !(delta > R::zero()) {
        return Err(Error::invalid(format!(
            "step size must be positive, got {delta}"
        )));
    }
    if !(a < R::zero()) {
        return Err(Error::invalid(format!(
            "state coefficient must be negative, got {a}"
        )));
    }
    Ok(((delta * a).exp(), delta * b))
}
