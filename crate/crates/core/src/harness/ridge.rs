use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};

/// Closed-form ridge readout `W = (FᵀF + λI)⁻¹ Fᵀ Y` over one-hot labels.
#[derive(Debug, Clone)]
pub struct RidgeModel {
    /// `features × classes`.
    pub weights: DMatrix<f64>,
}

impl RidgeModel {
    pub fn scores(&self, features: &[f64]) -> Vec<f64> {
        let p = self.weights.nrows();
        assert_eq!(features.len(), p, "feature length mismatch");
        (0..self.weights.ncols())
            .map(|k| (0..p).map(|i| features[i] * self.weights[(i, k)]).sum())
            .collect()
    }

    /// Arg-max class; ties resolve to the lowest index.
    pub fn predict(&self, features: &[f64]) -> usize {
        let scores = self.scores(features);
        let mut best = 0;
        for (k, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = k;
            }
        }
        best
    }

    pub fn accuracy(&self, features: &[Vec<f64>], labels: &[usize]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let hits = features
            .iter()
            .zip(labels)
            .filter(|(f, &y)| self.predict(f) == y)
            .count();
        hits as f64 / labels.len() as f64
    }
}

/// Fits the ridge probe.
///
/// When there are fewer samples than features the equivalent dual form
/// `Fᵀ(FFᵀ + λI)⁻¹Y` is solved instead; both give the same `W` for `λ > 0`.
pub fn ridge_probe(
    features: &[Vec<f64>],
    labels: &[usize],
    classes: usize,
    lambda: f64,
) -> Result<RidgeModel> {
    let n = features.len();
    if n == 0 || n != labels.len() {
        return Err(Error::invalid(format!(
            "{n} feature rows for {} labels",
            labels.len()
        )));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "ridge penalty must be finite and non-negative, got {lambda}"
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::invalid(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let p = features[0].len();
    if features.iter().any(|f| f.len() != p) {
        return Err(Error::shape("feature rows have different lengths"));
    }
    let f = DMatrix::from_fn(n, p, |i, j| features[i][j]);
    let y = DMatrix::from_fn(n, classes, |i, k| f64::from(labels[i] == k));

    let weights = if lambda > 0.0 && n < p {
        let gram = &f * f.transpose() + DMatrix::identity(n, n) * lambda;
        let chol =
            Cholesky::new(gram).ok_or_else(|| Error::Singular("dual ridge system".into()))?;
        f.transpose() * chol.solve(&y)
    } else {
        let gram = f.transpose() * &f + DMatrix::identity(p, p) * lambda;
        let chol = Cholesky::new(gram).ok_or_else(|| {
            Error::Singular(format!(
                "FᵀF + {lambda}·I is not positive definite; use a positive penalty"
            ))
        })?;
        chol.solve(&(f.transpose() * y))
    };
    Ok(RidgeModel { weights })
}
