//! Dense row-major matrices and the handful of kernels the network engine needs.
//!
//! Matrix products go through `matrixmultiply`, which takes arbitrary strides, so
//! transposed operands are expressed as stride swaps rather than copies.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("singular tridiagonal system (zero pivot at row {row})")]
    Singular { row: usize },
}

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Shape(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
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
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
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
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Contiguous block of rows `[start, start + count)`.
    pub fn row_block(&self, start: usize, count: usize) -> MatRef<'_> {
        assert!(start + count <= self.rows, "row block out of range");
        MatRef {
            data: &self.data[start * self.cols..(start + count) * self.cols],
            rows: count,
            cols: self.cols,
            rs: self.cols as isize,
            cs: 1,
        }
    }

    pub fn view(&self) -> MatRef<'_> {
        MatRef { data: &self.data, rows: self.rows, cols: self.cols, rs: self.cols as isize, cs: 1 }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Borrowed strided matrix view.
#[derive(Debug, Clone, Copy)]
pub struct MatRef<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl<'a> MatRef<'a> {
    /// View a contiguous row-major slice as `rows x cols`.
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols, "slice length does not match view shape");
        Self { data, rows, cols, rs: cols as isize, cs: 1 }
    }

    pub fn t(self) -> Self {
        Self { data: self.data, rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

/// `c <- alpha * a * b + beta * c` where `c` is a contiguous row-major block.
///
/// Panics on shape mismatch; shapes are fixed by the caller's network layout.
pub fn gemm(alpha: f64, a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: &mut [f64], c_cols: usize) {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(k, b.rows, "inner dimensions differ");
    assert_eq!(n, c_cols, "output column count differs");
    assert_eq!(c.len(), m * n, "output block has wrong size");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    // SAFETY: every index touched by dgemm is bounded by the asserted shapes and
    // the strides of views created from slices of exactly those shapes.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Fresh `a * b`, written straight into unzeroed storage.
pub fn matmul(a: MatRef<'_>, b: MatRef<'_>) -> Matrix {
    let (m, k, n) = (a.rows, a.cols, b.cols);
    assert_eq!(k, b.rows, "inner dimensions differ");
    if m == 0 || n == 0 || k == 0 {
        return Matrix::zeros(m, n);
    }
    let mut data: Vec<f64> = Vec::with_capacity(m * n);
    // SAFETY: with beta = 0 dgemm never reads C and writes all m * n entries
    // of the freshly reserved buffer before the length is set.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs,
            a.cs,
            b.data.as_ptr(),
            b.rs,
            b.cs,
            0.0,
            data.as_mut_ptr(),
            n as isize,
            1,
        );
        data.set_len(m * n);
    }
    Matrix { rows: m, cols: n, data }
}

/// Solves a tridiagonal system with the Thomas algorithm.
///
/// `lower[i]` multiplies `x[i-1]` in row `i` (`lower[0]` unused), `upper[i]`
/// multiplies `x[i+1]` (`upper[n-1]` unused).
pub fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>, LinalgError> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(LinalgError::Shape("tridiagonal bands must share one length".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(LinalgError::Singular { row: 0 });
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(LinalgError::Singular { row: i });
        }
        c[i] = if i + 1 < n { upper[i] / pivot } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}
