//! Dense double-precision vectors and matrices.
//!
//! These are plain value types. Anything that needs gradients goes through
//! [`crate::tape::Tape`], which records the same primitives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    pub data: Vec<f64>,
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn zeros(len: usize) -> Self {
        Vector { data: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector { data: self.data.iter().map(|&z| f(z)).collect() }
    }

    pub fn sigmoid(&self) -> Vector {
        self.map(sigmoid)
    }

    pub fn relu(&self) -> Vector {
        self.map(relu)
    }

    pub fn tanh(&self) -> Vector {
        self.map(f64::tanh)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Vector { data }
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Ok(Matrix { rows: rows.len(), cols, data: rows.concat() })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, v: &Vector) -> Result<Vector> {
        if self.cols != v.len() {
            return Err(Error::shape(format!(
                "matvec: matrix is {}x{} but vector has length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(Vector { data: matvec_raw(&self.data, self.rows, self.cols, &v.data) })
    }
}

pub(crate) fn matvec_raw(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| m[r * cols..(r + 1) * cols].iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Subgradient at 0 is taken as 0.
pub fn relu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Per-term logistic cross-entropy of a logit against a 0/1 target,
/// `-[t ln σ(a) + (1-t) ln(1-σ(a))] = softplus(a) - t·a`.
pub fn bce_term(a: f64, t: f64) -> f64 {
    softplus(a) - t * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn matvec_examples() {
        let v = Vector::new(vec![3.0, -1.0]);
        assert_eq!(Matrix::identity(2).matvec(&v).unwrap(), v);

        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.matvec(&Vector::new(vec![1.0, 1.0])).unwrap().data, vec![3.0, 7.0]);

        let z = Matrix::zeros(3, 2).matvec(&Vector::new(vec![5.0, -2.0])).unwrap();
        assert_eq!(z.data, vec![0.0; 3]);
    }

    #[test]
    fn matvec_rejects_mismatch() {
        let err = Matrix::zeros(2, 3).matvec(&Vector::zeros(2)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("length 2"), "{msg}");
    }

    #[test]
    fn elementwise_examples() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_abs_diff_eq!(sigmoid(3.0), 0.952574, epsilon = 1e-6);
        assert_abs_diff_eq!(1.0f64.tanh(), 0.761594, epsilon = 1e-6);
        assert_eq!(Vector::new(vec![-1.0, 0.0, 2.0]).relu().data, vec![0.0, 0.0, 2.0]);
        assert_eq!(Vector::new(vec![-1.0, -3.0]).relu().data, vec![0.0, 0.0]);
        assert_eq!(Vector::new(vec![1.0, 3.0]).relu().data, vec![1.0, 3.0]);
    }

    #[test]
    fn bce_is_stable_at_large_logits() {
        assert!(bce_term(800.0, 1.0).abs() < 1e-300);
        assert_abs_diff_eq!(bce_term(-800.0, 1.0), 800.0, epsilon = 1e-9);
        assert_abs_diff_eq!(bce_term(0.0, 1.0), std::f64::consts::LN_2, epsilon = 1e-15);
    }
}
