use serde::{Deserialize, Serialize};

use super::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// Plain SGD or Adam (β1 = 0.9, β2 = 0.999, ε = 1e-8) over a fixed list of
/// parameter tensors.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    step: u32,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Optimizer {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        Optimizer { kind, lr, step: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (x, d) in p.data_mut().iter_mut().zip(g.data()) {
                        *x -= self.lr * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.m.is_empty() {
                    self.m = grads.iter().map(|g| Tensor::zeros(g.rows(), g.cols())).collect();
                    self.v = self.m.clone();
                }
                self.step += 1;
                let c1 = 1.0 - Self::BETA1.powi(self.step as i32);
                let c2 = 1.0 - Self::BETA2.powi(self.step as i32);
                for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let (m, v) = (self.m[k].data_mut(), self.v[k].data_mut());
                    for (i, (x, d)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        m[i] = Self::BETA1 * m[i] + (1.0 - Self::BETA1) * d;
                        v[i] = Self::BETA2 * v[i] + (1.0 - Self::BETA2) * d * d;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        *x -= self.lr * m_hat / (v_hat.sqrt() + Self::EPS);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_with_zero_grad_is_noop() {
        let mut p = Tensor::row(vec![1.0, -2.0]);
        let before = p.clone();
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.5);
        opt.step(&mut [&mut p], &[Tensor::zeros(1, 2)]);
        assert_eq!(p, before);
    }

    #[test]
    fn first_adam_step_moves_by_lr() {
        let mut p = Tensor::scalar(3.0);
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1);
        opt.step(&mut [&mut p], &[Tensor::scalar(1.0)]);
        // m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
        assert!((p.data()[0] - (3.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-15);
    }

    #[test]
    fn deterministic_trajectories() {
        let run = || {
            let mut p = Tensor::row(vec![0.5, -0.5]);
            let mut opt = Optimizer::new(OptimizerKind::Adam, 0.05);
            for i in 0..20 {
                let g = p.map(|x| 2.0 * x + 0.1 * i as f64);
                opt.step(&mut [&mut p], &[g]);
            }
            p
        };
        assert_eq!(run(), run());
    }
}
