//! Dense numerical kernels: row-major f64 matrices, softmax/cross-entropy,
//! linear and ReLU forward/backward, Adam, LR schedules, and a
//! finite-difference gradient checker. All math is 64-bit.

mod adam;
mod gradcheck;
mod schedule;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{grad_check, DEFAULT_PERTURBATION};
pub use schedule::Schedule;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NumError {
    #[error("{context}: dimension mismatch ({left} vs {right})")]
    DimMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },
    #[error("data length {got} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, got: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("cannot normalize a vector with zero norm")]
    ZeroNorm,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("epoch {epoch} out of schedule range (total {total})")]
    EpochOutOfRange { epoch: usize, total: usize },
}

/// Dense row-major matrix of 64-bit floats.
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

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, NumError> {
        if data.len() != rows * cols {
            return Err(NumError::DataLength {
                rows,
                cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NumError::NonFinite("matrix data"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumError> {
        if rows.is_empty() {
            return Err(NumError::EmptyInput);
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(NumError::DimMismatch {
                    context: "from_rows",
                    left: cols,
                    right: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Matrix::from_vec(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
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

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Standard product; `self.cols` must equal `other.rows`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix, NumError> {
        if self.cols != other.rows {
            return Err(NumError::DimMismatch {
                context: "matmul",
                left: self.cols,
                right: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let brow = &other.data[k * other.cols..(k + 1) * other.cols];
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * x` for a column vector x.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, NumError> {
        if self.cols != x.len() {
            return Err(NumError::DimMismatch {
                context: "matvec",
                left: self.cols,
                right: x.len(),
            });
        }
        let mut out = vec![0.0; self.rows];
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        Ok(out)
    }

    /// `self^T * x` without materializing the transpose.
    pub fn matvec_t(&self, x: &[f64]) -> Result<Vec<f64>, NumError> {
        if self.rows != x.len() {
            return Err(NumError::DimMismatch {
                context: "matvec_t",
                left: self.rows,
                right: x.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (r, &xv) in x.iter().enumerate() {
            if xv == 0.0 {
                continue;
            }
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * xv;
            }
        }
        Ok(out)
    }

    /// Accumulate `scale * (a outer b)` into self; self must be a.len x b.len.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64], scale: f64) -> Result<(), NumError> {
        if self.rows != a.len() || self.cols != b.len() {
            return Err(NumError::DimMismatch {
                context: "add_outer",
                left: self.rows * self.cols,
                right: a.len() * b.len(),
            });
        }
        for (r, &av) in a.iter().enumerate() {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (o, &bv) in row.iter_mut().zip(b) {
                *o += scale * av * bv;
            }
        }
        Ok(())
    }
}

/// Outer product `a b^T` as an a.len x b.len matrix.
pub fn outer(a: &[f64], b: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(a.len(), b.len());
    m.add_outer(a, b, 1.0).expect("shapes match by construction");
    m
}

/// Numerically stable softmax (max subtraction). Output sums to 1.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>, NumError> {
    if z.is_empty() {
        return Err(NumError::EmptyInput);
    }
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(NumError::NonFinite("softmax input"));
    }
    let mut out: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

/// Cross-entropy of `logits` against a one-hot `label`.
/// Returns the loss and the gradient w.r.t. the logits
/// (`softmax(logits) - onehot(label)`).
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>), NumError> {
    if label >= logits.len() {
        return Err(NumError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let probs = softmax(logits)?;
    let loss = -probs[label].ln();
    let mut grad = probs;
    grad[label] -= 1.0;
    Ok((loss, grad))
}

/// Forward pass of a bias-free linear layer: `y = W x`.
pub fn linear_forward(weights: &Matrix, x: &[f64]) -> Result<Vec<f64>, NumError> {
    weights.matvec(x)
}

/// Backward pass of `y = W x`: given upstream `dy`, returns
/// (`W^T dy`, `dy outer x`).
pub fn linear_backward(
    weights: &Matrix,
    x: &[f64],
    dy: &[f64],
) -> Result<(Vec<f64>, Matrix), NumError> {
    if dy.len() != weights.rows() {
        return Err(NumError::DimMismatch {
            context: "linear_backward",
            left: weights.rows(),
            right: dy.len(),
        });
    }
    if x.len() != weights.cols() {
        return Err(NumError::DimMismatch {
            context: "linear_backward",
            left: weights.cols(),
            right: x.len(),
        });
    }
    let dx = weights.matvec_t(dy)?;
    Ok((dx, outer(dy, x)))
}

/// Elementwise `max(0, x)`.
pub fn relu(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| v.max(0.0)).collect()
}

/// ReLU backward; the subgradient at the kink is 0, so positions with
/// `x <= 0` block the upstream gradient.
pub fn relu_backward(x: &[f64], upstream: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), upstream.len());
    x.iter()
        .zip(upstream)
        .map(|(&xv, &g)| if xv > 0.0 { g } else { 0.0 })
        .collect()
}

/// Scale `v` to unit Euclidean norm. Errors on a zero vector.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>, NumError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(NumError::ZeroNorm);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Scale gradients in place so their global L2 norm is at most `max_norm`.
/// Returns the pre-clip norm. A no-op when the norm is already within bounds.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}
