use crate::error::{Error, Result};
use crate::grid::{Grid, QueryGrid, TokenGrid};
use crate::meter::BufferMeter;
use crate::real::Real;

/// Bin `i` of `n_out` over a length `n_in` axis: `[⌊i·n_in/n_out⌋, ⌊(i+1)·n_in/n_out⌋)`.
#[inline]
pub fn pool_bin(i: usize, n_in: usize, n_out: usize) -> std::ops::Range<usize> {
    (i * n_in / n_out)..((i + 1) * n_in / n_out)
}

/// Adaptive 3-D average pooling of a token grid to `(T', h', w')`.
///
/// Bins tile every axis exactly, so each source token lands in one cell.
pub fn adaptive_pool3d<R: Real>(
    z: &TokenGrid<R>,
    frames: usize,
    height: usize,
    width: usize,
) -> Result<QueryGrid<R>> {
    adaptive_pool3d_metered(z, frames, height, width, &mut BufferMeter::new())
}

pub fn adaptive_pool3d_metered<R: Real>(
    z: &TokenGrid<R>,
    frames: usize,
    height: usize,
    width: usize,
    meter: &mut BufferMeter,
) -> Result<QueryGrid<R>> {
    let [t, h, w, d] = z.dims();
    if frames == 0 || height == 0 || width == 0 {
        return Err(Error::invalid("pooled dims must be positive"));
    }
    if frames > t || height > h || width > w {
        return Err(Error::invalid(format!(
            "cannot pool {t}x{h}x{w} up to {frames}x{height}x{width}"
        )));
    }
    meter.declare("pooled queries", frames * height * width * d, R::BYTES)?;
    let mut out = Vec::with_capacity(frames * height * width * d);
    let mut acc = vec![R::zero(); d];
    for i in 0..frames {
        let tb = pool_bin(i, t, frames);
        for j in 0..height {
            let yb = pool_bin(j, h, height);
            for k in 0..width {
                let xb = pool_bin(k, w, width);
                acc.iter_mut().for_each(|v| *v = R::zero());
                for ti in tb.clone() {
                    for y in yb.clone() {
                        for x in xb.clone() {
                            for (a, &v) in acc.iter_mut().zip(z.token(ti, y, x)) {
                                *a = *a + v;
                            }
                        }
                    }
                }
                let count = R::from_usize(tb.len() * yb.len() * xb.len()).expect("bin size fits");
                out.extend(acc.iter().map(|&a| a / count));
            }
        }
    }
    Grid::new([frames, height, width, d], out)
}
