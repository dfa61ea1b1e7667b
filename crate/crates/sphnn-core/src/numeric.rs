//! Dense matrix kernel, elementwise activations, the Adam optimizer, and the
//! finite-difference gradient oracle.
//!
//! Everything is double precision and serial, so results are bitwise
//! reproducible for a fixed seed. Shapes are checked at the public boundary
//! and violations surface as [`NumericError`] rather than panics.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericError {
    #[error("shape mismatch in {op}: left is {lhs_rows}x{lhs_cols}, right is {rhs_rows}x{rhs_cols}")]
    ShapeMismatch {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },
    #[error("softmax row {row} is fully masked")]
    AllMasked { row: usize },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
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
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must be rows*cols");
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    /// 1xN row vector.
    pub fn row_vector(data: Vec<f64>) -> Self {
        Matrix {
            rows: 1,
            cols: data.len(),
            data,
        }
    }

    /// 1x1 matrix holding a single scalar.
    pub fn scalar(value: f64) -> Self {
        Matrix {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        let c = self.cols;
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Sum of elementwise products; the Frobenius inner product.
    pub fn dot(&self, other: &Matrix) -> Result<f64, NumericError> {
        check_same_shape("dot", self, other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_same_shape(op: &'static str, a: &Matrix, b: &Matrix) -> Result<(), NumericError> {
    if a.shape() != b.shape() {
        return Err(NumericError::ShapeMismatch {
            op,
            lhs_rows: a.rows,
            lhs_cols: a.cols,
            rhs_rows: b.rows,
            rhs_cols: b.cols,
        });
    }
    Ok(())
}

/// C = A * B. Inner loop runs over contiguous rows of B so the compiler can
/// vectorize it.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix, NumericError> {
    if a.cols != b.rows {
        return Err(NumericError::ShapeMismatch {
            op: "matmul",
            lhs_rows: a.rows,
            lhs_cols: a.cols,
            rhs_rows: b.rows,
            rhs_cols: b.cols,
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    let n = b.cols;
    for i in 0..a.rows {
        let a_row = a.row(i);
        let out_row = &mut out.data[i * n..(i + 1) * n];
        for (k, &aik) in a_row.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let b_row = &b.data[k * n..(k + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    }
    Ok(out)
}

pub fn transpose(a: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.cols, a.rows);
    for i in 0..a.rows {
        for j in 0..a.cols {
            out.data[j * a.rows + i] = a.data[i * a.cols + j];
        }
    }
    out
}

pub fn add(a: &Matrix, b: &Matrix) -> Result<Matrix, NumericError> {
    check_same_shape("add", a, b)?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Ok(Matrix {
        rows: a.rows,
        cols: a.cols,
        data,
    })
}

pub fn sub(a: &Matrix, b: &Matrix) -> Result<Matrix, NumericError> {
    check_same_shape("sub", a, b)?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x - y).collect();
    Ok(Matrix {
        rows: a.rows,
        cols: a.cols,
        data,
    })
}

pub fn scale(a: &Matrix, s: f64) -> Matrix {
    a.map(|v| v * s)
}

/// Elementwise product.
pub fn hadamard(a: &Matrix, b: &Matrix) -> Result<Matrix, NumericError> {
    check_same_shape("hadamard", a, b)?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    Ok(Matrix {
        rows: a.rows,
        cols: a.cols,
        data,
    })
}

/// `a += s * b`, in place.
pub fn axpy(a: &mut Matrix, s: f64, b: &Matrix) -> Result<(), NumericError> {
    check_same_shape("axpy", a, b)?;
    for (x, y) in a.data.iter_mut().zip(&b.data) {
        *x += s * y;
    }
    Ok(())
}

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        slope
    }
}

pub fn leaky_relu_mat(a: &Matrix, slope: f64) -> Matrix {
    a.map(|v| leaky_relu(v, slope))
}

pub fn tanh_elem(a: &Matrix) -> Matrix {
    a.map(f64::tanh)
}

/// Horizontal concatenation `[A | B]`.
pub fn concat_cols(a: &Matrix, b: &Matrix) -> Result<Matrix, NumericError> {
    if a.rows != b.rows {
        return Err(NumericError::ShapeMismatch {
            op: "concat_cols",
            lhs_rows: a.rows,
            lhs_cols: a.cols,
            rhs_rows: b.rows,
            rhs_cols: b.cols,
        });
    }
    let cols = a.cols + b.cols;
    let mut out = Matrix::zeros(a.rows, cols);
    for i in 0..a.rows {
        out.data[i * cols..i * cols + a.cols].copy_from_slice(a.row(i));
        out.data[i * cols + a.cols..(i + 1) * cols].copy_from_slice(b.row(i));
    }
    Ok(out)
}

/// Numerically stable softmax over a slice, written into `out`.
pub fn softmax_slice(scores: &[f64], out: &mut [f64]) {
    debug_assert_eq!(scores.len(), out.len());
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        let e = (s - max).exp();
        *o = e;
        sum += e;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Softmax applied independently to each row.
pub fn row_softmax(a: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows, a.cols);
    for i in 0..a.rows {
        let (src, dst) = (a.row(i), i);
        softmax_slice(src, out.row_mut(dst));
    }
    out
}

/// Row softmax restricted to entries whose mask is nonzero. Masked-out entries
/// get probability 0; the unmasked entries of each row renormalize to 1.
pub fn masked_softmax(scores: &Matrix, mask: &Matrix) -> Result<Matrix, NumericError> {
    check_same_shape("masked_softmax", scores, mask)?;
    let mut out = Matrix::zeros(scores.rows, scores.cols);
    for i in 0..scores.rows {
        let s = scores.row(i);
        let m = mask.row(i);
        let max = s
            .iter()
            .zip(m)
            .filter(|(_, &mv)| mv != 0.0)
            .map(|(&sv, _)| sv)
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(NumericError::AllMasked { row: i });
        }
        let mut sum = 0.0;
        let row = out.row_mut(i);
        for j in 0..s.len() {
            if m[j] != 0.0 {
                let e = (s[j] - max).exp();
                row[j] = e;
                sum += e;
            }
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Ok(out)
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 5e-4,
        }
    }
}

/// Per-tensor Adam state: moment estimates, step counter, hyperparameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Matrix,
    pub v: Matrix,
    pub step: u64,
    pub hyper: AdamHyper,
}

impl AdamState {
    pub fn new(rows: usize, cols: usize, hyper: AdamHyper) -> Self {
        AdamState {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            step: 0,
            hyper,
        }
    }
}

/// One Adam step with decoupled weight decay. Weight decay is skipped when
/// `decay` is false (bias-like vectors, the self-connection scalar).
pub fn adam_step(
    param: &mut Matrix,
    grad: &Matrix,
    state: &mut AdamState,
    decay: bool,
) -> Result<(), NumericError> {
    check_same_shape("adam_step", param, grad)?;
    check_same_shape("adam_step", param, &state.m)?;
    state.step += 1;
    let h = state.hyper;
    let t = state.step as i32;
    let bc1 = 1.0 - h.beta1.powi(t);
    let bc2 = 1.0 - h.beta2.powi(t);
    for i in 0..param.data.len() {
        let g = grad.data[i];
        let m = h.beta1 * state.m.data[i] + (1.0 - h.beta1) * g;
        let v = h.beta2 * state.v.data[i] + (1.0 - h.beta2) * g * g;
        state.m.data[i] = m;
        state.v.data[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        let mut p = param.data[i];
        if decay {
            p -= h.lr * h.weight_decay * p;
        }
        param.data[i] = p - h.lr * m_hat / (v_hat.sqrt() + h.eps);
    }
    Ok(())
}

/// Central-difference gradient check. Returns the max over entries of
/// `|fd - an| / max(1, |fd|, |an|)`.
pub fn finite_diff_check<F>(
    mut loss_fn: F,
    param: &mut Matrix,
    analytic_grad: &Matrix,
    step: f64,
) -> Result<f64, NumericError>
where
    F: FnMut(&Matrix) -> Result<f64, NumericError>,
{
    assert!(step > 0.0, "step must be positive");
    check_same_shape("finite_diff_check", param, analytic_grad)?;
    let mut worst = 0.0f64;
    for i in 0..param.data.len() {
        let orig = param.data[i];
        param.data[i] = orig + step;
        let plus = loss_fn(param)?;
        param.data[i] = orig - step;
        let minus = loss_fn(param)?;
        param.data[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(NumericError::NonFinite {
                op: "finite_diff_check",
            });
        }
        let fd = (plus - minus) / (2.0 * step);
        let an = analytic_grad.data[i];
        let rel = (fd - an).abs() / 1.0f64.max(fd.abs()).max(an.abs());
        worst = worst.max(rel);
    }
    Ok(worst)
}
