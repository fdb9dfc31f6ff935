//! Adam with bias correction.

use ndarray::{Array2, Zip};

use super::params::ParamSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct AdamState {
    pub step_count: u64,
    pub first_moment: Vec<Array2<f64>>,
    pub second_moment: Vec<Array2<f64>>,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with the usual `beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`.
    pub fn new(params: &ParamSet, learning_rate: f64) -> Self {
        let zeros: Vec<_> = params.iter().map(|(_, v)| Array2::zeros(v.dim())).collect();
        Self {
            step_count: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    /// Applies one update. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Array2<f64>]) -> Result<()> {
        if grads.len() != params.len() || self.first_moment.len() != params.len() {
            return Err(Error::Contract(format!(
                "adam got {} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for (id, g) in params.ids().zip(grads) {
            if g.dim() != params.get(id).dim() {
                return Err(Error::Shape {
                    op: "adam_step",
                    lhs: params.get(id).dim(),
                    rhs: g.dim(),
                });
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    param: params.name(id).to_owned(),
                });
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
        let bc1 = 1.0 - b1.powi(t);
        let bc2 = 1.0 - b2.powi(t);
        for (((p, g), m), v) in params
            .values_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            });
        }
        Ok(())
    }
}
