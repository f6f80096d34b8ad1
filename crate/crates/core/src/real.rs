use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Floating-point element type used by every kernel.
///
/// Correctness checks run in `f64`; benchmarks may opt into `f32`.
pub trait Real:
    Float + FromPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Dtype code written into tensor files.
    const DTYPE: u8;
    const BYTES: usize;
    const NAME: &'static str;

    fn of_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Real for f64 {
    const DTYPE: u8 = 1;
    const BYTES: usize = 8;
    const NAME: &'static str = "f64";

    #[inline]
    fn of_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8-byte chunk"))
    }
}

impl Real for f32 {
    const DTYPE: u8 = 2;
    const BYTES: usize = 4;
    const NAME: &'static str = "f32";

    #[inline]
    fn of_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4-byte chunk"))
    }
}

/// `ln(1 + e^x)`, stable for large |x|.
#[inline]
pub fn softplus<R: Real>(x: R) -> R {
    let zero = R::zero();
    x.max(zero) + (-x.abs()).exp().ln_1p()
}

#[inline]
pub fn sigmoid<R: Real>(x: R) -> R {
    R::one() / (R::one() + (-x).exp())
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inverse(y: f64) -> f64 {
    assert!(y > 0.0, "softplus_inverse needs y > 0");
    y + (-(-y).exp_m1()).ln()
}
