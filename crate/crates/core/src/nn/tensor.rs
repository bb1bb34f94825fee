use rand::Rng;

/// Dense row-major tensor of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Self { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape {shape:?} does not match data length");
        Self { shape: shape.to_vec(), data }
    }

    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
        Self { shape: shape.to_vec(), data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rounds every entry to the nearest `f32`.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }
}

/// `c = a * b^T (+ c)`, with `a: rows x inner`, `b: cols x inner`.
pub(crate) fn gemm_abt(rows: usize, inner: usize, cols: usize, a: &[f64], b: &[f64], c: &mut [f64], accumulate: bool) {
    debug_assert!(a.len() >= rows * inner && b.len() >= cols * inner && c.len() >= rows * cols);
    if rows == 0 || cols == 0 {
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    unsafe {
        matrixmultiply::dgemm(
            rows, inner, cols, 1.0,
            a.as_ptr(), inner as isize, 1,
            b.as_ptr(), 1, inner as isize,
            beta, c.as_mut_ptr(), cols as isize, 1,
        );
    }
}

/// `c = a * b (+ c)`, with `a: rows x inner`, `b: inner x cols`.
pub(crate) fn gemm_ab(rows: usize, inner: usize, cols: usize, a: &[f64], b: &[f64], c: &mut [f64], accumulate: bool) {
    debug_assert!(a.len() >= rows * inner && b.len() >= cols * inner && c.len() >= rows * cols);
    if rows == 0 || cols == 0 {
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    unsafe {
        matrixmultiply::dgemm(
            rows, inner, cols, 1.0,
            a.as_ptr(), inner as isize, 1,
            b.as_ptr(), cols as isize, 1,
            beta, c.as_mut_ptr(), cols as isize, 1,
        );
    }
}

/// `c += a^T * b`, with `a: inner x rows`, `b: inner x cols`.
pub(crate) fn gemm_atb_acc(rows: usize, inner: usize, cols: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert!(a.len() >= rows * inner && b.len() >= cols * inner && c.len() >= rows * cols);
    if rows == 0 || cols == 0 || inner == 0 {
        return;
    }
    unsafe {
        matrixmultiply::dgemm(
            rows, inner, cols, 1.0,
            a.as_ptr(), 1, rows as isize,
            b.as_ptr(), cols as isize, 1,
            1.0, c.as_mut_ptr(), cols as isize, 1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_variants_match_naive() {
        let a: Vec<f64> = (0..6).map(|v| v as f64 - 2.0).collect(); // 2x3
        let b: Vec<f64> = (0..12).map(|v| (v as f64) * 0.5).collect(); // 4x3
        let mut c = vec![0.0; 8];
        gemm_abt(2, 3, 4, &a, &b, &mut c, false);
        for i in 0..2 {
            for j in 0..4 {
                let want: f64 = (0..3).map(|k| a[i * 3 + k] * b[j * 3 + k]).sum();
                assert_eq!(c[i * 4 + j], want);
            }
        }
        // b as 3x4 for a*b
        let mut c2 = vec![1.0; 8];
        gemm_ab(2, 3, 4, &a, &b, &mut c2, true);
        for i in 0..2 {
            for j in 0..4 {
                let want: f64 = 1.0 + (0..3).map(|k| a[i * 3 + k] * b[k * 4 + j]).sum::<f64>();
                assert!((c2[i * 4 + j] - want).abs() < 1e-12);
            }
        }
        // a^T b with a: 2x3 (inner=2, rows=3), b: 2x4
        let b2: Vec<f64> = (0..8).map(|v| v as f64).collect();
        let mut c3 = vec![0.0; 12];
        gemm_atb_acc(3, 2, 4, &a, &b2, &mut c3);
        for i in 0..3 {
            for j in 0..4 {
                let want: f64 = (0..2).map(|k| a[k * 3 + i] * b2[k * 4 + j]).sum();
                assert!((c3[i * 4 + j] - want).abs() < 1e-12);
            }
        }
    }
}
