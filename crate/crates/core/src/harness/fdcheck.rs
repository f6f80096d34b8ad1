use crate::error::{Error, Result};
use crate::grid::Seq;
use crate::rng::Rng;
use crate::ssm::{scan_sequential, scan_vjp, SsmInit, SsmParams};

/// A random scan problem: input, parameters and output cotangent.
#[derive(Debug, Clone)]
pub struct ScanInstance {
    pub x: Seq<f64>,
    pub params: SsmParams<f64>,
    pub dy: Seq<f64>,
}

impl ScanInstance {
    pub fn random(len: usize, channels: usize, state: usize, rng: &mut Rng) -> Self {
        let params = SsmParams::init(channels, state, SsmInit::default(), rng);
        Self {
            x: Seq::random(len, channels, 1.0, rng),
            params,
            dy: Seq::random(len, channels, 1.0, rng),
        }
    }

    /// `⟨dy, scan(x, p)⟩` at the joint point `[x; flat(p)]`.
    fn objective(&self, point: &[f64]) -> Result<f64> {
        let nx = self.x.data().len();
        let x = Seq::new(self.x.len(), self.x.dim(), point[..nx].to_vec())?;
        let p = SsmParams::from_flat(self.params.channels, self.params.state, &point[nx..])?;
        let y = scan_sequential(&x, &p)?;
        Ok(y.data()
            .iter()
            .zip(self.dy.data())
            .map(|(a, b)| a * b)
            .sum())
    }

    fn point(&self) -> Vec<f64> {
        let mut v = self.x.data().to_vec();
        v.extend(self.params.to_flat());
        v
    }

    fn gradient(&self) -> Result<Vec<f64>> {
        let g = scan_vjp(&self.x, &self.params, &self.dy)?;
        let mut v = g.param_flat();
        v.splice(0..0, g.dx.into_data());
        Ok(v)
    }
}

/// Differentiable scalar functions with a known analytic gradient.
#[derive(Debug, Clone)]
pub enum FdTarget {
    /// `x ↦ xᵀx` at the given point; central differences are exact up to
    /// roundoff, which calibrates the checker itself.
    Quadratic(Vec<f64>),
    Scan(ScanInstance),
}

impl FdTarget {
    fn point(&self) -> Vec<f64> {
        match self {
            FdTarget::Quadratic(x) => x.clone(),
            FdTarget::Scan(s) => s.point(),
        }
    }

    fn value(&self, at: &[f64]) -> Result<f64> {
        let v = match self {
            FdTarget::Quadratic(_) => at.iter().map(|v| v * v).sum(),
            FdTarget::Scan(s) => s.objective(at)?,
        };
        if !v.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        Ok(v)
    }

    fn gradient(&self) -> Result<Vec<f64>> {
        match self {
            FdTarget::Quadratic(x) => Ok(x.iter().map(|v| 2.0 * v).collect()),
            FdTarget::Scan(s) => s.gradient(),
        }
    }
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Worst relative error between central-difference directional derivatives
/// and the analytic gradient.
///
/// Probes are every coordinate axis plus `random_probes` Gaussian directions.
pub fn fd_check(target: &FdTarget, step: f64, random_probes: usize, rng: &mut Rng) -> Result<f64> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let point = target.point();
    let grad = target.gradient()?;
    if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let n = point.len();
    let mut probes: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect();
    probes.extend((0..random_probes).map(|_| rng.normal_vec(n, 1.0)));

    let mut worst = 0.0f64;
    for v in &probes {
        let shifted = |sign: f64| -> Vec<f64> {
            point
                .iter()
                .zip(v)
                .map(|(p, d)| p + sign * step * d)
                .collect()
        };
        let numeric = (target.value(&shifted(1.0))? - target.value(&shifted(-1.0))?) / (2.0 * step);
        let analytic: f64 = grad.iter().zip(v).map(|(g, d)| g * d).sum();
        worst = worst.max(relative_error(analytic, numeric));
    }
    Ok(worst)
}
