use crate::error::Result;
use crate::grid::Seq;
use crate::rng::Rng;
use crate::ssm::{scan_chunked, scan_sequential, SsmInit, SsmParams};

use super::fdcheck::{fd_check, FdTarget, ScanInstance};

/// Outcome of a seeded batch of checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckReport {
    pub instances: usize,
    /// Number of individual comparisons (instance × chunk size, or probes).
    pub comparisons: usize,
    /// Worst relative deviation over all comparisons.
    pub max_error: f64,
}

/// `max|a − b| / max|b|`, with the denominator floored at 1e-300.
pub fn normwise_deviation(a: &Seq<f64>, b: &Seq<f64>) -> f64 {
    let diff = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let scale = b.data().iter().map(|v| v.abs()).fold(0.0, f64::max);
    diff / scale.max(1e-300)
}

/// Chunked scan against the sequential oracle on `instances` random problems
/// with `L′ ≤ 256`, `d ≤ 8`, `Nₛ ≤ 16` and chunk sizes `{1, 3, 7, 32, L′}`.
pub fn scan_oracle_check(seed: u64, instances: usize) -> Result<CheckReport> {
    let mut rng = Rng::new(seed);
    let mut max_error = 0.0f64;
    let mut comparisons = 0;
    for _ in 0..instances {
        let len = 1 + rng.below(256);
        let d = 1 + rng.below(8);
        let n = 1 + rng.below(16);
        let init = SsmInit {
            base_step: rng.uniform_range(0.01, 1.0),
            ..SsmInit::default()
        };
        let p = SsmParams::init(d, n, init, &mut rng);
        let x = Seq::random(len, d, 1.0, &mut rng);
        let oracle = scan_sequential(&x, &p)?;
        for chunk in [1, 3, 7, 32, len] {
            let y = scan_chunked(&x, &p, chunk)?;
            max_error = max_error.max(normwise_deviation(&y, &oracle));
            comparisons += 1;
        }
    }
    Ok(CheckReport {
        instances,
        comparisons,
        max_error,
    })
}

/// Finite-difference check of the scan gradient on `instances` small random
/// problems (`L′ ≤ 6`, `d ≤ 3`, `Nₛ ≤ 4`), each probed along every
/// coordinate and `random_probes` random directions.
pub fn grad_check(
    seed: u64,
    instances: usize,
    step: f64,
    random_probes: usize,
) -> Result<CheckReport> {
    let mut rng = Rng::new(seed);
    let mut max_error = 0.0f64;
    let mut comparisons = 0;
    for _ in 0..instances {
        let len = 1 + rng.below(6);
        let d = 1 + rng.below(3);
        let n = 1 + rng.below(4);
        let inst = ScanInstance::random(len, d, n, &mut rng);
        comparisons += len * d + inst.params.flat_len() + random_probes;
        max_error = max_error.max(fd_check(
            &FdTarget::Scan(inst),
            step,
            random_probes,
            &mut rng,
        )?);
    }
    Ok(CheckReport {
        instances,
        comparisons,
        max_error,
    })
}
