//! The fixed layer set of the liveness network, each with forward and
//! backward passes.

mod batchnorm;
mod conv;
mod dropout;
mod linear;
mod pool;
mod relu;
mod softmax;

pub use batchnorm::{BatchNorm, DEFAULT_EPSILON, DEFAULT_MOMENTUM};
pub use conv::Conv3x3;
pub use dropout::Dropout;
pub use linear::Linear;
pub use pool::{route_to_argmax, MaxPool2x2};
pub use relu::Relu;
pub use softmax::{softmax, softmax_cross_entropy};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv3x3,
    BatchNorm,
    Relu,
    MaxPool2x2,
    Dropout,
    Flatten,
    Linear,
}

#[derive(Clone, Debug)]
pub enum Layer<T: Real = f32> {
    Conv(Conv3x3<T>),
    BatchNorm(BatchNorm<T>),
    Relu(Relu<T>),
    MaxPool(MaxPool2x2<T>),
    Dropout(Dropout<T>),
    /// `[N, C, H, W]` → `[N, C·H·W]`; remembers the input shape for backward.
    Flatten(Option<Vec<usize>>),
    Linear(Linear<T>),
}

fn flatten<T: Real>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let n = *x
        .shape()
        .first()
        .ok_or_else(|| Error::shape("flatten", "rank >= 1", x.shape()))?;
    x.clone().reshape(&[n, x.len() / n])
}

impl<T: Real> Layer<T> {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Conv(_) => LayerKind::Conv3x3,
            Layer::BatchNorm(_) => LayerKind::BatchNorm,
            Layer::Relu(_) => LayerKind::Relu,
            Layer::MaxPool(_) => LayerKind::MaxPool2x2,
            Layer::Dropout(_) => LayerKind::Dropout,
            Layer::Flatten(_) => LayerKind::Flatten,
            Layer::Linear(_) => LayerKind::Linear,
        }
    }

    /// Forward pass that caches whatever backward needs.
    pub fn forward<R: Rng>(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Tensor<T>> {
        match self {
            Layer::Conv(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Relu(l) => Ok(l.forward(x)),
            Layer::MaxPool(l) => l.forward(x),
            Layer::Dropout(l) => Ok(l.forward(x, mode, rng)),
            Layer::Flatten(shape) => {
                *shape = Some(x.shape().to_vec());
                flatten(x)
            }
            Layer::Linear(l) => l.forward(x),
        }
    }

    /// Infer-mode forward through a shared reference; no caching.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv(l) => l.infer(x),
            Layer::BatchNorm(l) => l.infer(x),
            Layer::Relu(l) => Ok(l.infer(x)),
            Layer::MaxPool(l) => l.infer(x),
            Layer::Dropout(_) => Ok(x.clone()),
            Layer::Flatten(_) => flatten(x),
            Layer::Linear(l) => l.infer(x),
        }
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Conv(l) => l.backward(grad_out),
            Layer::BatchNorm(l) => l.backward(grad_out),
            Layer::Relu(l) => l.backward(grad_out),
            Layer::MaxPool(l) => l.backward(grad_out),
            Layer::Dropout(l) => l.backward(grad_out),
            Layer::Flatten(shape) => {
                let shape = shape
                    .take()
                    .ok_or_else(|| Error::State("flatten backward called before forward".into()))?;
                grad_out.clone().reshape(&shape)
            }
            Layer::Linear(l) => l.backward(grad_out),
        }
    }

    /// Trainable tensors in serialization order.
    pub fn params(&self) -> Vec<(&'static str, &Tensor<T>)> {
        match self {
            Layer::Conv(l) => vec![("weight", &l.weight), ("bias", &l.bias)],
            Layer::Linear(l) => vec![("weight", &l.weight), ("bias", &l.bias)],
            Layer::BatchNorm(l) => vec![("gamma", &l.gamma), ("beta", &l.beta)],
            _ => Vec::new(),
        }
    }

    /// Non-trainable state (BatchNorm running statistics).
    pub fn buffers(&self) -> Vec<(&'static str, &Tensor<T>)> {
        match self {
            Layer::BatchNorm(l) => vec![("running_mean", &l.running_mean), ("running_var", &l.running_var)],
            _ => Vec::new(),
        }
    }

    /// Parameters and buffers, mutable, in the same order as
    /// `params()` followed by `buffers()`.
    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor<T>)> {
        match self {
            Layer::Conv(l) => vec![("weight", &mut l.weight), ("bias", &mut l.bias)],
            Layer::Linear(l) => vec![("weight", &mut l.weight), ("bias", &mut l.bias)],
            Layer::BatchNorm(l) => vec![
                ("gamma", &mut l.gamma),
                ("beta", &mut l.beta),
                ("running_mean", &mut l.running_mean),
                ("running_var", &mut l.running_var),
            ],
            _ => Vec::new(),
        }
    }

    /// Each trainable tensor paired with the gradient from the last backward.
    pub fn params_and_grads_mut(&mut self) -> Vec<(&mut Tensor<T>, &Tensor<T>)> {
        match self {
            Layer::Conv(l) => vec![(&mut l.weight, &l.grad_weight), (&mut l.bias, &l.grad_bias)],
            Layer::Linear(l) => vec![(&mut l.weight, &l.grad_weight), (&mut l.bias, &l.grad_bias)],
            Layer::BatchNorm(l) => vec![(&mut l.gamma, &l.grad_gamma), (&mut l.beta, &l.grad_beta)],
            _ => Vec::new(),
        }
    }

    pub fn grads(&self) -> Vec<&Tensor<T>> {
        match self {
            Layer::Conv(l) => vec![&l.grad_weight, &l.grad_bias],
            Layer::Linear(l) => vec![&l.grad_weight, &l.grad_bias],
            Layer::BatchNorm(l) => vec![&l.grad_gamma, &l.grad_beta],
            _ => Vec::new(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Same layer with parameters and buffers converted to another scalar
    /// type; forward caches are dropped.
    pub fn cast<U: Real>(&self) -> Layer<U> {
        match self {
            Layer::Conv(l) => {
                Layer::Conv(Conv3x3::from_params(l.weight.cast(), l.bias.cast()).expect("shapes already valid"))
            }
            Layer::Linear(l) => {
                Layer::Linear(Linear::from_params(l.weight.cast(), l.bias.cast()).expect("shapes already valid"))
            }
            Layer::BatchNorm(l) => {
                let mut bn = BatchNorm::<U>::new(l.channels(), l.epsilon().as_f64(), l.momentum().as_f64());
                bn.gamma = l.gamma.cast();
                bn.beta = l.beta.cast();
                bn.running_mean = l.running_mean.cast();
                bn.running_var = l.running_var.cast();
                Layer::BatchNorm(bn)
            }
            Layer::Relu(_) => Layer::Relu(Relu::new()),
            Layer::MaxPool(_) => Layer::MaxPool(MaxPool2x2::new()),
            Layer::Dropout(l) => Layer::Dropout(Dropout::new(l.rate()).expect("rate already valid")),
            Layer::Flatten(_) => Layer::Flatten(None),
        }
    }
}

/// Trainable scalars across a layer stack.
pub fn param_count<T: Real>(layers: &[Layer<T>]) -> usize {
    layers.iter().map(Layer::param_count).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_stack_has_no_params() {
        assert_eq!(param_count::<f32>(&[]), 0);
        let stack = [Layer::<f32>::Relu(Relu::new()), Layer::Linear(Linear::new(3, 2))];
        assert_eq!(param_count(&stack), 8);
    }
}
