//! Dense 2-D tensors with a reverse-mode tape.

mod checkpoint;
mod optim;
mod tape;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::Rng;

pub use checkpoint::{Checkpoint, TensorEntry};
pub use optim::{Optimizer, OptimizerKind};
pub use tape::{weighted_bce, Tape, Var, BCE_EPS};

/// Row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "tensor",
                detail: format!("{} values for a {rows}x{cols} tensor", data.len()),
            });
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn row(values: Vec<f64>) -> Self {
        Tensor { rows: 1, cols: values.len(), data: values }
    }

    pub fn column(values: Vec<f64>) -> Self {
        Tensor { rows: values.len(), cols: 1, data: values }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Tensor::zeros(n, n);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    /// Uniform in `[-bound, bound)`.
    pub fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> Self {
        let data = (0..rows * cols)
            .map(|_| if bound == 0.0 { 0.0 } else { rng.random_range(-bound..bound) })
            .collect();
        Tensor { rows, cols, data }
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

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn transpose(&self) -> Tensor {
        let mut out = Tensor::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.cols != other.rows {
            return Err(Error::Shape {
                op: "matmul",
                detail: format!("{}x{} times {}x{}", self.rows, self.cols, other.rows, other.cols),
            });
        }
        let (n, m) = (self.rows, other.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let o = &mut out[i * m..(i + 1) * m];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b = &other.data[k * m..(k + 1) * m];
                for (o, b) in o.iter_mut().zip(b) {
                    *o += a * b;
                }
            }
        }
        Ok(Tensor { rows: n, cols: m, data: out })
    }

    /// `self · otherᵀ`.
    pub(crate) fn matmul_nt(&self, other: &Tensor) -> Tensor {
        debug_assert_eq!(self.cols, other.cols);
        let (n, m, k) = (self.rows, other.rows, self.cols);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let a = &self.data[i * k..(i + 1) * k];
            for j in 0..m {
                let b = &other.data[j * k..(j + 1) * k];
                out[i * m + j] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        Tensor { rows: n, cols: m, data: out }
    }

    /// `selfᵀ · other`.
    pub(crate) fn matmul_tn(&self, other: &Tensor) -> Tensor {
        debug_assert_eq!(self.rows, other.rows);
        let (n, m) = (self.cols, other.cols);
        let mut out = vec![0.0; n * m];
        for r in 0..self.rows {
            let b = &other.data[r * m..(r + 1) * m];
            for i in 0..n {
                let a = self.data[r * n + i];
                if a == 0.0 {
                    continue;
                }
                let o = &mut out[i * m..(i + 1) * m];
                for (o, b) in o.iter_mut().zip(b) {
                    *o += a * b;
                }
            }
        }
        Tensor { rows: n, cols: m, data: out }
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = Tensor::new(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(Tensor::identity(2).matmul(&a).unwrap(), a);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn transposed_products_agree() {
        let mut rng = crate::rng::rng(3);
        let a = Tensor::uniform(3, 4, 1.0, &mut rng);
        let b = Tensor::uniform(5, 4, 1.0, &mut rng);
        let c = Tensor::uniform(3, 5, 1.0, &mut rng);
        let nt = a.matmul_nt(&b);
        let direct = a.matmul(&b.transpose()).unwrap();
        let tn = a.matmul_tn(&c);
        let direct_tn = a.transpose().matmul(&c).unwrap();
        for (x, y) in nt.data().iter().zip(direct.data()).chain(tn.data().iter().zip(direct_tn.data())) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_length_rejected() {
        assert!(Tensor::new(2, 2, vec![1.0; 3]).is_err());
    }
}
