use crate::error::{Error, Result};
use crate::real::Real;
use crate::rng::Rng;

/// Dense `(T, h, w, d)` token array, temporal-major then row-major spatial then
/// channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<R> {
    frames: usize,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<R>,
}

/// Encoder-output stand-in: `L = T·h·w` spatiotemporal tokens.
pub type TokenGrid<R = f64> = Grid<R>;
/// Compressed queries: `N = T'·h'·w'` tokens sharing the source channel count.
pub type QueryGrid<R = f64> = Grid<R>;

impl<R: Real> Grid<R> {
    pub fn new(dims: [usize; 4], data: Vec<R>) -> Result<Self> {
        let [frames, height, width, channels] = dims;
        if dims.contains(&0) {
            return Err(Error::shape(format!(
                "grid dims must be positive, got {dims:?}"
            )));
        }
        let expected = frames
            .checked_mul(height)
            .and_then(|n| n.checked_mul(width))
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| Error::shape("grid element count overflows"))?;
        if data.len() != expected {
            return Err(Error::shape(format!(
                "grid {dims:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            frames,
            height,
            width,
            channels,
            data,
        })
    }

    pub fn zeros(dims: [usize; 4]) -> Result<Self> {
        let n = dims.iter().product();
        Self::new(dims, vec![R::zero(); n])
    }

    pub fn from_fn(
        dims: [usize; 4],
        mut f: impl FnMut(usize, usize, usize, usize) -> R,
    ) -> Result<Self> {
        let [t, h, w, d] = dims;
        let mut data = Vec::with_capacity(t * h * w * d);
        for ti in 0..t {
            for y in 0..h {
                for x in 0..w {
                    for c in 0..d {
                        data.push(f(ti, y, x, c));
                    }
                }
            }
        }
        Self::new(dims, data)
    }

    /// Standard-normal entries scaled by `scale`.
    pub fn random(dims: [usize; 4], scale: f64, rng: &mut Rng) -> Result<Self> {
        let n = dims.iter().product();
        let data = (0..n).map(|_| R::of_f64(scale * rng.normal())).collect();
        Self::new(dims, data)
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.frames, self.height, self.width, self.channels]
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Number of tokens `T·h·w`.
    pub fn tokens(&self) -> usize {
        self.frames * self.height * self.width
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn into_data(self) -> Vec<R> {
        self.data
    }

    /// Sequence index of grid position `(t, y, x)`.
    #[inline]
    pub fn token_index(&self, t: usize, y: usize, x: usize) -> usize {
        (t * self.height + y) * self.width + x
    }

    /// Inverse of [`Grid::token_index`].
    #[inline]
    pub fn position(&self, index: usize) -> (usize, usize, usize) {
        let x = index % self.width;
        let y = (index / self.width) % self.height;
        let t = index / (self.width * self.height);
        (t, y, x)
    }

    pub fn token(&self, t: usize, y: usize, x: usize) -> &[R] {
        let i = self.token_index(t, y, x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// The `L` token vectors in temporal-major, row-major spatial order.
    pub fn flatten(&self) -> Seq<R> {
        Seq {
            len: self.tokens(),
            dim: self.channels,
            data: self.data.clone(),
        }
    }

    pub fn unflatten(seq: Seq<R>, frames: usize, height: usize, width: usize) -> Result<Self> {
        if seq.len != frames * height * width {
            return Err(Error::shape(format!(
                "cannot reshape {} tokens into {frames}x{height}x{width}",
                seq.len
            )));
        }
        Self::new([frames, height, width, seq.dim], seq.data)
    }

    pub fn cast<S: Real>(&self) -> Grid<S> {
        Grid {
            frames: self.frames,
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| S::of_f64(v.as_f64())).collect(),
        }
    }
}

/// A 1-D sequence of `len` vectors of dimension `dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq<R> {
    len: usize,
    dim: usize,
    data: Vec<R>,
}

impl<R: Real> Seq<R> {
    pub fn new(len: usize, dim: usize, data: Vec<R>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::shape("sequence dimension must be positive"));
        }
        if data.len() != len * dim {
            return Err(Error::shape(format!(
                "sequence {len}x{dim} needs {} elements, got {}",
                len * dim,
                data.len()
            )));
        }
        Ok(Self { len, dim, data })
    }

    pub fn zeros(len: usize, dim: usize) -> Self {
        Self {
            len,
            dim,
            data: vec![R::zero(); len * dim],
        }
    }

    pub fn from_rows<I, V>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = V>,
        V: AsRef<[R]>,
    {
        let mut data = Vec::new();
        let mut len = 0;
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::shape(format!(
                    "row {len} has length {}, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
            len += 1;
        }
        Self::new(len, dim, data)
    }

    pub fn random(len: usize, dim: usize, scale: f64, rng: &mut Rng) -> Self {
        let data = (0..len * dim)
            .map(|_| R::of_f64(scale * rng.normal()))
            .collect();
        Self { len, dim, data }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[R] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [R] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<R> {
        self.data
    }

    #[inline]
    pub fn row(&self, k: usize) -> &[R] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, k: usize) -> &mut [R] {
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, R> {
        self.data.chunks_exact(self.dim)
    }

    /// Same vectors in reverse sequence order.
    pub fn reversed(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.rows().rev() {
            data.extend_from_slice(row);
        }
        Self {
            len: self.len,
            dim: self.dim,
            data,
        }
    }

    /// Index of the first non-finite element, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.len != other.len || self.dim != other.dim {
            return Err(Error::shape(format!(
                "cannot add {}x{} and {}x{}",
                self.len, self.dim, other.len, other.dim
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a + b)
            .collect();
        Ok(Self {
            len: self.len,
            dim: self.dim,
            data,
        })
    }

    pub fn cast<S: Real>(&self) -> Seq<S> {
        Seq {
            len: self.len,
            dim: self.dim,
            data: self.data.iter().map(|v| S::of_f64(v.as_f64())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert_eq, proptest};

    #[test]
    fn single_token_flatten_is_identity() {
        let g = Grid::<f64>::new([1, 1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap();
        let s = g.flatten();
        assert_eq!(s.len(), 1);
        assert_eq!(s.row(0), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn flatten_is_temporal_major() {
        // 2x1x2x1 grid [a, b, c, d] enumerated as (t, y, x) lexicographic.
        let g = Grid::<f64>::from_fn([2, 1, 2, 1], |t, _y, x, _c| (10 * t + x) as f64).unwrap();
        let s = g.flatten();
        let order: Vec<f64> = s.rows().map(|r| r[0]).collect();
        assert_eq!(order, vec![0.0, 1.0, 10.0, 11.0]);
    }

    #[test]
    fn token_index_and_position_are_inverse() {
        let g = Grid::<f64>::zeros([3, 4, 5, 1]).unwrap();
        let mut seen = vec![false; g.tokens()];
        for t in 0..3 {
            for y in 0..4 {
                for x in 0..5 {
                    let i = g.token_index(t, y, x);
                    assert!(!seen[i]);
                    seen[i] = true;
                    assert_eq!(g.position(i), (t, y, x));
                }
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn rejects_bad_length_and_nan() {
        assert!(matches!(
            Grid::<f64>::new([1, 1, 2, 1], vec![0.0]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            Grid::<f64>::new([1, 1, 2, 1], vec![0.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(Grid::<f64>::new([0, 1, 1, 1], vec![]).is_err());
    }

    #[test]
    fn seeded_grids_are_identical() {
        let a = Grid::<f64>::random([2, 3, 3, 4], 1.0, &mut Rng::new(9)).unwrap();
        let b = Grid::<f64>::random([2, 3, 3, 4], 1.0, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn unflatten_inverts_flatten(t in 1usize..5, h in 1usize..5, w in 1usize..5, d in 1usize..4, seed in any::<u64>()) {
            let g = Grid::<f64>::random([t, h, w, d], 1.0, &mut Rng::new(seed)).unwrap();
            let back = Grid::unflatten(g.flatten(), t, h, w).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
