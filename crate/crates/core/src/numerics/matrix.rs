use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::Rng;
use crate::{Error, Result};

/// Rows whose Euclidean norm is at or below this value are rejected by
/// cosine and normalization operations.
pub const NORM_FLOOR: f64 = 1e-12;

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        f.debug_list()
            .entries((0..self.rows).map(|r| self.row(r)))
            .finish()
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn scalar(value: f64) -> Self {
        Self::filled(1, 1, value)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally long rows.
    ///
    /// Panics on ragged input; meant for literals and tests.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.as_ref().len(), cols, "ragged rows");
            data.extend_from_slice(r.as_ref());
        }
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn random_uniform(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut Rng) -> Self {
        let data = (0..rows * cols).map(|_| rng.uniform(lo, hi)).collect();
        Self { rows, cols, data }
    }

    pub fn random_normal(rows: usize, cols: usize, std: f64, rng: &mut Rng) -> Self {
        let data = (0..rows * cols).map(|_| std * rng.normal()).collect();
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// The single entry of a 1x1 matrix.
    pub fn as_scalar(&self) -> Option<f64> {
        (self.shape() == (1, 1)).then(|| self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_shape(other, op)?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub(crate) fn same_shape(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    /// `self += other`, shapes must agree.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.same_shape(other, "add_assign")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (k, m) = (self.cols, other.cols);
        Ok(gemm(self.rows, k, m, &self.data, (k, 1), &other.data, (m, 1)))
    }

    /// `self · otherᵀ` without materializing the transpose.
    pub fn matmul_nt(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::Dimension {
                op: "matmul_nt",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let k = self.cols;
        Ok(gemm(self.rows, k, other.rows, &self.data, (k, 1), &other.data, (1, k)))
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn matmul_tn(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::Dimension {
                op: "matmul_tn",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (n, m) = (self.cols, other.cols);
        Ok(gemm(n, self.rows, m, &self.data, (1, n), &other.data, (m, 1)))
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.rows).map(|r| norm(self.row(r))).collect()
    }

    /// Scales every row to unit Euclidean norm.
    pub fn l2_normalize_rows(&self) -> Result<Self> {
        let mut out = self.clone();
        for r in 0..self.rows {
            let n = norm(self.row(r));
            if n <= NORM_FLOOR {
                return Err(Error::Degenerate {
                    op: "l2_normalize_rows",
                    row: r,
                });
            }
            out.row_mut(r).iter_mut().for_each(|v| *v /= n);
        }
        Ok(out)
    }

    /// Stacks matrices with equal column counts.
    pub fn concat_rows(parts: &[&Matrix]) -> Result<Self> {
        let cols = parts.first().map_or(0, |m| m.cols);
        let mut data = Vec::new();
        let mut rows = 0;
        for m in parts {
            if m.cols != cols {
                return Err(Error::Dimension {
                    op: "concat_rows",
                    left: (rows, cols),
                    right: m.shape(),
                });
            }
            data.extend_from_slice(&m.data);
            rows += m.rows;
        }
        Ok(Self { rows, cols, data })
    }

    /// Places matrices with equal row counts side by side.
    pub fn concat_cols(parts: &[&Matrix]) -> Result<Self> {
        let rows = parts.first().map_or(0, |m| m.rows);
        let cols: usize = parts.iter().map(|m| m.cols).sum();
        let mut out = Self::zeros(rows, cols);
        let mut offset = 0;
        for m in parts {
            if m.rows != rows {
                return Err(Error::Dimension {
                    op: "concat_cols",
                    left: (rows, offset),
                    right: m.shape(),
                });
            }
            for r in 0..rows {
                out.row_mut(r)[offset..offset + m.cols].copy_from_slice(m.row(r));
            }
            offset += m.cols;
        }
        Ok(out)
    }

    /// Gathers the listed rows (repeats allowed).
    pub fn select_rows(&self, index: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(index.len() * self.cols);
        for &r in index {
            if r >= self.rows {
                return Err(Error::Contract(alloc::format!(
                    "select_rows: row {r} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(r));
        }
        Ok(Self {
            rows: index.len(),
            cols: self.cols,
            data,
        })
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `m×k · k×n` product of strided operands; strides are `(row, col)`.
fn gemm(m: usize, k: usize, n: usize, a: &[f64], sa: (usize, usize), b: &[f64], sb: (usize, usize)) -> Matrix {
    let mut out = Matrix::zeros(m, n);
    if m == 0 || k == 0 || n == 0 {
        return out;
    }
    debug_assert!(a.len() == m * k && b.len() == k * n);
    // SAFETY: the operands hold exactly m·k and k·n elements addressed by the
    // given strides, and `out` owns m·n row-major elements.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            sa.0 as isize,
            sa.1 as isize,
            b.as_ptr(),
            sb.0 as isize,
            sb.1 as isize,
            0.0,
            out.data.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    out
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(x: &Matrix) -> Result<Matrix> {
    if x.is_empty() {
        return Err(Error::Contract("softmax_rows: empty input".into()));
    }
    let mut out = x.clone();
    for r in 0..x.rows {
        softmax_in_place(out.row_mut(r));
    }
    Ok(out)
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = libm::exp(*v - max);
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// `out[i][j] = cos(a_i, b_j)`.
pub fn cosine_rows(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.cols {
        return Err(Error::Dimension {
            op: "cosine_rows",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let an = a.l2_normalize_rows().map_err(|e| relabel(e, "cosine_rows (left)"))?;
    let bn = b.l2_normalize_rows().map_err(|e| relabel(e, "cosine_rows (right)"))?;
    an.matmul_nt(&bn)
}

fn relabel(e: Error, op: &'static str) -> Error {
    match e {
        Error::Degenerate { row, .. } => Error::Degenerate { op, row },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triple_loop(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for p in 0..a.cols() {
                    s += a.get(i, p) * b.get(p, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn identity_times_a() {
        let a = Matrix::from_rows(&[[1.5, -2.0], [0.25, 4.0]]);
        assert_eq!(Matrix::identity(2).matmul(&a).unwrap(), a);
    }

    #[test]
    fn times_zero_column() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let z = Matrix::zeros(2, 1);
        assert_eq!(a.matmul(&z).unwrap(), Matrix::zeros(2, 1));
    }

    #[test]
    fn matmul_matches_triple_loop() {
        for seed in 0..10 {
            let mut rng = Rng::new(seed);
            let a = Matrix::random_uniform(3, 4, -2.0, 2.0, &mut rng);
            let b = Matrix::random_uniform(4, 2, -2.0, 2.0, &mut rng);
            let got = a.matmul(&b).unwrap();
            let want = triple_loop(&a, &b);
            for (g, w) in got.data().iter().zip(want.data()) {
                assert!((g - w).abs() < 1e-12);
            }
            let nt = a.matmul_nt(&b.transpose()).unwrap();
            let tn = a.transpose().matmul_tn(&b).unwrap();
            for ((g, x), y) in want.data().iter().zip(nt.data()).zip(tn.data()) {
                assert!((g - x).abs() < 1e-12 && (g - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn matmul_shape_error_names_both() {
        let err = Matrix::zeros(2, 3).matmul(&Matrix::zeros(2, 3)).unwrap_err();
        assert_eq!(
            err,
            Error::Dimension {
                op: "matmul",
                left: (2, 3),
                right: (2, 3)
            }
        );
        let text = alloc::format!("{err}");
        assert!(text.contains("2x3 and 2x3"));
    }

    #[test]
    fn softmax_examples() {
        let s = softmax_rows(&Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0]])).unwrap();
        assert_eq!(s.row(0), &[0.5, 0.5]);
        // e / (1 + e)
        let e = libm::exp(1.0);
        assert!((s.get(1, 0) - e / (1.0 + e)).abs() < 1e-15);
        assert!((s.get(1, 0) - 0.73106).abs() < 1e-5);
        assert!((s.get(1, 1) - 0.26894).abs() < 1e-5);
    }

    #[test]
    fn softmax_shift_invariant_and_stable() {
        let x = Matrix::from_rows(&[[0.3, -1.2, 2.0]]);
        let shifted = x.map(|v| v + 800.0);
        let a = softmax_rows(&x).unwrap();
        let b = softmax_rows(&shifted).unwrap();
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-12);
        }
        assert!(b.is_finite());
    }

    #[test]
    fn softmax_rejects_empty() {
        assert!(softmax_rows(&Matrix::zeros(0, 0)).is_err());
    }

    #[test]
    fn cosine_examples() {
        let c = cosine_rows(&Matrix::from_rows(&[[3.0, 4.0]]), &Matrix::from_rows(&[[3.0, 4.0]])).unwrap();
        assert!((c.get(0, 0) - 1.0).abs() < 1e-15);
        let c = cosine_rows(&Matrix::from_rows(&[[1.0, 0.0]]), &Matrix::from_rows(&[[0.0, 1.0]])).unwrap();
        assert_eq!(c.get(0, 0), 0.0);
        let c = cosine_rows(&Matrix::from_rows(&[[1.0, 1.0]]), &Matrix::from_rows(&[[1.0, 0.0]])).unwrap();
        assert!((c.get(0, 0) - 0.70711).abs() < 1e-5);
    }

    #[test]
    fn cosine_zero_row_is_degenerate() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]);
        let err = cosine_rows(&a, &Matrix::from_rows(&[[1.0, 1.0]])).unwrap_err();
        assert_eq!(
            err,
            Error::Degenerate {
                op: "cosine_rows (left)",
                row: 1
            }
        );
    }

    #[test]
    fn concat_and_select() {
        let a = Matrix::from_rows(&[[1.0, 2.0]]);
        let b = Matrix::from_rows(&[[3.0, 4.0], [5.0, 6.0]]);
        let c = Matrix::concat_rows(&[&a, &b]).unwrap();
        assert_eq!(c.shape(), (3, 2));
        assert_eq!(c.select_rows(&[2, 0]).unwrap(), Matrix::from_rows(&[[5.0, 6.0], [1.0, 2.0]]));
        let d = Matrix::concat_cols(&[&b, &b]).unwrap();
        assert_eq!(d.row(1), &[5.0, 6.0, 5.0, 6.0]);
        assert!(c.select_rows(&[3]).is_err());
    }
}
