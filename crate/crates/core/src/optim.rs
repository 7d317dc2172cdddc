//! SGD with momentum and Adam.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(Self::Sgd),
            "adam" => Ok(Self::Adam),
            other => Err(Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// SGD momentum.
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            lr,
            momentum: 0.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn sgd(lr: f64, momentum: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            lr,
            momentum,
            ..Self::adam(lr)
        }
    }
}

/// Per-parameter moments, allocated on the first step in parameter order.
#[derive(Clone, Debug)]
pub struct Optimizer<T: Real = f32> {
    config: OptimizerConfig,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    step: u64,
}

impl<T: Real> Optimizer<T> {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            first: Vec::new(),
            second: Vec::new(),
            step: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update over `(param, grad)` pairs. The pairs must come in the
    /// same order and with the same shapes on every call.
    pub fn step(&mut self, params: Vec<(&mut Tensor<T>, &Tensor<T>)>) -> Result<()> {
        if self.first.is_empty() {
            self.first = params.iter().map(|(p, _)| vec![T::zero(); p.len()]).collect();
            if self.config.kind == OptimizerKind::Adam {
                self.second = self.first.clone();
            }
        }
        if params.len() != self.first.len() {
            return Err(Error::shape("optimizer parameter list", self.first.len(), params.len()));
        }
        self.step += 1;
        let lr = T::from_f64(self.config.lr);

        for (i, (param, grad)) in params.into_iter().enumerate() {
            if param.shape() != grad.shape() || self.first[i].len() != param.len() {
                return Err(Error::shape("optimizer parameter", param.shape(), grad.shape()));
            }
            match self.config.kind {
                OptimizerKind::Sgd => {
                    let mu = T::from_f64(self.config.momentum);
                    for ((p, &g), v) in param
                        .data_mut()
                        .iter_mut()
                        .zip(grad.data())
                        .zip(self.first[i].iter_mut())
                    {
                        *v = mu * *v + g;
                        *p = *p - lr * *v;
                    }
                }
                OptimizerKind::Adam => {
                    let b1 = T::from_f64(self.config.beta1);
                    let b2 = T::from_f64(self.config.beta2);
                    let eps = T::from_f64(self.config.epsilon);
                    let c1 = T::from_f64(1.0 - self.config.beta1.powf(self.step as f64));
                    let c2 = T::from_f64(1.0 - self.config.beta2.powf(self.step as f64));
                    for (((p, &g), m), v) in param
                        .data_mut()
                        .iter_mut()
                        .zip(grad.data())
                        .zip(self.first[i].iter_mut())
                        .zip(self.second[i].iter_mut())
                    {
                        *m = b1 * *m + (T::one() - b1) * g;
                        *v = b2 * *v + (T::one() - b2) * g * g;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
            param.ensure_finite("optimizer step")?;
        }
        Ok(())
    }
}
