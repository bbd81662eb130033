use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

/// In-place first-order update of a fixed list of parameter tensors.
pub trait Optimizer {
    /// Applies one update. `grads[i]` is the gradient of `params[i]`.
    fn step(&mut self, params: &mut [&mut Tensor], grads: &[&[f64]]) -> Result<()>;
}

fn check_lengths(params: &[&mut Tensor], grads: &[&[f64]]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::contract(format!(
            "{} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() {
            return Err(Error::contract(format!(
                "gradient {i} has {} elements, parameter {}",
                g.len(),
                p.len()
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub learning_rate: f64,
}

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut [&mut Tensor], grads: &[&[f64]]) -> Result<()> {
        check_lengths(params, grads)?;
        for (p, g) in params.iter_mut().zip(grads) {
            for (v, d) in p.data_mut().iter_mut().zip(*g) {
                *v -= self.learning_rate * d;
            }
        }
        Ok(())
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }
}

impl Optimizer for Adam {
    fn step(&mut self, params: &mut [&mut Tensor], grads: &[&[f64]]) -> Result<()> {
        check_lengths(params, grads)?;
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != grads.len() {
            return Err(Error::contract(
                "Adam state was built for a different parameter list",
            ));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (k, (val, &d)) in p.data_mut().iter_mut().zip(g.iter()).enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * d;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * d * d;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                *val -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

pub(crate) fn build(kind: OptimizerKind, learning_rate: f64) -> Box<dyn Optimizer + Send> {
    match kind {
        OptimizerKind::Adam => Box::new(Adam::new(learning_rate)),
        OptimizerKind::Sgd => Box::new(Sgd { learning_rate }),
    }
}
