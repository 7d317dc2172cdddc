//! Central finite-difference verification of analytic gradients in `f64`.
//!
//! The scalar objective is `L = Σ y ⊙ probe` for a fixed random `probe`, so
//! the analytic input gradient is `backward(probe)`. Each forward evaluation
//! reseeds the dropout RNG, which keeps masks identical across perturbations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::layers::{Layer, Mode};
use crate::tensor::Tensor;

pub const DEFAULT_STEP: f64 = 1e-5;
/// Denominator floor for the relative error of near-zero gradients.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct TensorError {
    pub name: String,
    pub max_relative_error: f64,
    pub elements: usize,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub input: TensorError,
    pub params: Vec<TensorError>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_relative_error)
            .fold(self.input.max_relative_error, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error() < tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

fn outputs(layers: &mut [Layer<f64>], x: &Tensor<f64>, mode: Mode, seed: u64) -> Result<Tensor<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = x.clone();
    for layer in layers.iter_mut() {
        h = layer.forward(&h, mode, &mut rng)?;
    }
    Ok(h)
}

/// `(L(up) − L(down)) / 2h`, differencing outputs element-wise before
/// weighting by the probe to limit cancellation.
fn central_difference(up: &Tensor<f64>, down: &Tensor<f64>, probe: &Tensor<f64>, step: f64) -> f64 {
    let sum: f64 = up
        .data()
        .iter()
        .zip(down.data())
        .zip(probe.data())
        .map(|((u, d), p)| (u - d) * p)
        .sum();
    sum / (2.0 * step)
}

/// Checks the gradients of a layer stack with respect to its input and
/// every trainable tensor.
pub fn gradient_check(
    layers: &mut [Layer<f64>],
    input: &Tensor<f64>,
    mode: Mode,
    step: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let dropout_seed = rng.gen();

    // Analytic pass.
    let mut h = input.clone();
    let mut fwd_rng = ChaCha8Rng::seed_from_u64(dropout_seed);
    for layer in layers.iter_mut() {
        h = layer.forward(&h, mode, &mut fwd_rng)?;
    }
    let probe = Tensor::from_fn(h.shape(), |_| rng.gen_range(-1.0..1.0));
    let mut grad = probe.clone();
    for layer in layers.iter_mut().rev() {
        grad = layer.backward(&grad)?;
    }
    let analytic_input = grad;
    let analytic_params: Vec<Vec<Tensor<f64>>> = layers
        .iter()
        .map(|l| l.grads().into_iter().cloned().collect())
        .collect();

    let mut input_err = 0.0f64;
    for i in 0..input.len() {
        let mut plus = input.clone();
        plus.data_mut()[i] += step;
        let mut minus = input.clone();
        minus.data_mut()[i] -= step;
        let numeric = central_difference(
            &outputs(layers, &plus, mode, dropout_seed)?,
            &outputs(layers, &minus, mode, dropout_seed)?,
            &probe,
            step,
        );
        input_err = input_err.max(relative_error(analytic_input.data()[i], numeric));
    }

    let mut params = Vec::new();
    for li in 0..layers.len() {
        let names: Vec<&'static str> = layers[li].params().iter().map(|(n, _)| *n).collect();
        for (pi, name) in names.into_iter().enumerate() {
            let len = layers[li].params()[pi].1.len();
            let mut worst = 0.0f64;
            for e in 0..len {
                let original = layers[li].params_and_grads_mut()[pi].0.data()[e];
                layers[li].params_and_grads_mut()[pi].0.data_mut()[e] = original + step;
                let up = outputs(layers, input, mode, dropout_seed)?;
                layers[li].params_and_grads_mut()[pi].0.data_mut()[e] = original - step;
                let down = outputs(layers, input, mode, dropout_seed)?;
                layers[li].params_and_grads_mut()[pi].0.data_mut()[e] = original;
                let numeric = central_difference(&up, &down, &probe, step);
                worst = worst.max(relative_error(analytic_params[li][pi].data()[e], numeric));
            }
            params.push(TensorError {
                name: format!("layer{li}.{name}"),
                max_relative_error: worst,
                elements: len,
            });
        }
    }

    Ok(GradCheckReport {
        input: TensorError {
            name: "input".into(),
            max_relative_error: input_err,
            elements: input.len(),
        },
        params,
    })
}
