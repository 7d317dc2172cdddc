//! Batch normalization over the channel axis of `[N, C]` or `[N, C, H, W]`.
//!
//! Train mode normalizes with the biased batch variance over every axis but
//! the channel one and folds the unbiased variance into the running stats:
//! `running = momentum · running + (1 − momentum) · batch`.
//! Infer mode uses the running stats only.

use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::tensor::{Real, Tensor};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

#[derive(Clone, Debug)]
struct BnCache<T: Real> {
    mode: Mode,
    /// Normalized input, same layout as the forward input.
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct BatchNorm<T: Real = f32> {
    pub(crate) gamma: Tensor<T>,
    pub(crate) beta: Tensor<T>,
    pub(crate) running_mean: Tensor<T>,
    pub(crate) running_var: Tensor<T>,
    pub(crate) grad_gamma: Tensor<T>,
    pub(crate) grad_beta: Tensor<T>,
    epsilon: T,
    momentum: T,
    cache: Option<BnCache<T>>,
}

/// (batch, channels, spatial) view of an activation.
fn layout<T: Real>(x: &Tensor<T>, channels: usize) -> Result<(usize, usize)> {
    let shape = x.shape();
    if shape.len() < 2 || shape[1] != channels {
        return Err(Error::shape("batchnorm input", format!("[N, {channels}, ..]"), shape));
    }
    Ok((shape[0], shape[2..].iter().product()))
}

impl<T: Real> BatchNorm<T> {
    pub fn new(channels: usize, epsilon: f64, momentum: f64) -> Self {
        Self {
            gamma: Tensor::full(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            grad_gamma: Tensor::zeros(&[channels]),
            grad_beta: Tensor::zeros(&[channels]),
            epsilon: T::from_f64(epsilon),
            momentum: T::from_f64(momentum),
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn momentum(&self) -> T {
        self.momentum
    }

    pub fn gamma(&self) -> &Tensor<T> {
        &self.gamma
    }

    pub fn beta(&self) -> &Tensor<T> {
        &self.beta
    }

    pub fn running_mean(&self) -> &Tensor<T> {
        &self.running_mean
    }

    pub fn running_var(&self) -> &Tensor<T> {
        &self.running_var
    }

    pub fn grad_gamma(&self) -> &Tensor<T> {
        &self.grad_gamma
    }

    pub fn grad_beta(&self) -> &Tensor<T> {
        &self.grad_beta
    }

    pub fn gamma_mut(&mut self) -> &mut Tensor<T> {
        &mut self.gamma
    }

    pub fn beta_mut(&mut self) -> &mut Tensor<T> {
        &mut self.beta
    }

    fn affine(&self, xhat: &Tensor<T>, n: usize, spatial: usize) -> Tensor<T> {
        let c = self.channels();
        let mut out = xhat.clone();
        for (i, chunk) in out.data_mut().chunks_exact_mut(spatial).enumerate() {
            let ch = i % c;
            let (g, b) = (self.gamma.data()[ch], self.beta.data()[ch]);
            for v in chunk {
                *v = g * *v + b;
            }
        }
        debug_assert_eq!(out.len(), n * c * spatial);
        out
    }

    fn normalize_with(&self, x: &Tensor<T>, mean: &[T], inv_std: &[T], spatial: usize) -> Tensor<T> {
        let c = self.channels();
        let mut xhat = x.clone();
        for (i, chunk) in xhat.data_mut().chunks_exact_mut(spatial).enumerate() {
            let ch = i % c;
            for v in chunk {
                *v = (*v - mean[ch]) * inv_std[ch];
            }
        }
        xhat
    }

    fn running_inv_std(&self) -> Vec<T> {
        self.running_var
            .data()
            .iter()
            .map(|&v| T::one() / (v + self.epsilon).sqrt())
            .collect()
    }

    /// Infer-mode forward: pure function of the input and running stats.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, spatial) = layout(x, self.channels())?;
        let inv_std = self.running_inv_std();
        let xhat = self.normalize_with(x, self.running_mean.data(), &inv_std, spatial);
        let out = self.affine(&xhat, n, spatial);
        out.ensure_finite("batchnorm forward")?;
        Ok(out)
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let c = self.channels();
        let (n, spatial) = layout(x, c)?;
        let (mean, inv_std) = match mode {
            Mode::Infer => (self.running_mean.data().to_vec(), self.running_inv_std()),
            Mode::Train => {
                let count = n * spatial;
                if count < 2 {
                    return Err(Error::State(format!(
                        "batchnorm train mode needs at least 2 values per channel, got {count}"
                    )));
                }
                let m = T::from_f64(count as f64);
                let mut sum = vec![T::zero(); c];
                for (i, chunk) in x.data().chunks_exact(spatial).enumerate() {
                    sum[i % c] = sum[i % c] + chunk.iter().copied().sum::<T>();
                }
                let mean: Vec<T> = sum.iter().map(|&s| s / m).collect();
                let mut sq = vec![T::zero(); c];
                for (i, chunk) in x.data().chunks_exact(spatial).enumerate() {
                    let mu = mean[i % c];
                    sq[i % c] = sq[i % c] + chunk.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>();
                }
                let var: Vec<T> = sq.iter().map(|&s| s / m).collect();
                let unbias = m / (m - T::one());
                let keep = self.momentum;
                let take = T::one() - keep;
                for ch in 0..c {
                    let rm = &mut self.running_mean.data_mut()[ch];
                    *rm = keep * *rm + take * mean[ch];
                    let rv = &mut self.running_var.data_mut()[ch];
                    *rv = keep * *rv + take * var[ch] * unbias;
                }
                let inv_std = var.iter().map(|&v| T::one() / (v + self.epsilon).sqrt()).collect();
                (mean, inv_std)
            }
        };
        let xhat = self.normalize_with(x, &mean, &inv_std, spatial);
        let out = self.affine(&xhat, n, spatial);
        out.ensure_finite("batchnorm forward")?;
        self.cache = Some(BnCache { mode, xhat, inv_std });
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("batchnorm backward called before forward".into()))?;
        if grad_out.shape() != cache.xhat.shape() {
            return Err(Error::shape("batchnorm grad_out", cache.xhat.shape(), grad_out.shape()));
        }
        let c = self.channels();
        let (n, spatial) = layout(grad_out, c)?;
        let xhat = cache.xhat.data();
        let dy = grad_out.data();

        let mut sum_dy = vec![T::zero(); c];
        let mut sum_dy_xhat = vec![T::zero(); c];
        for (i, (g, xh)) in dy.chunks_exact(spatial).zip(xhat.chunks_exact(spatial)).enumerate() {
            let ch = i % c;
            sum_dy[ch] = sum_dy[ch] + g.iter().copied().sum::<T>();
            sum_dy_xhat[ch] = sum_dy_xhat[ch] + g.iter().zip(xh).map(|(&a, &b)| a * b).sum::<T>();
        }
        self.grad_beta.data_mut().copy_from_slice(&sum_dy);
        self.grad_gamma.data_mut().copy_from_slice(&sum_dy_xhat);

        let m = T::from_f64((n * spatial) as f64);
        let mut grad_in = grad_out.clone();
        for (i, (gin, xh)) in grad_in
            .data_mut()
            .chunks_exact_mut(spatial)
            .zip(xhat.chunks_exact(spatial))
            .enumerate()
        {
            let ch = i % c;
            let scale = self.gamma.data()[ch] * cache.inv_std[ch];
            match cache.mode {
                Mode::Infer => {
                    for g in gin.iter_mut() {
                        *g = *g * scale;
                    }
                }
                Mode::Train => {
                    let mean_dy = sum_dy[ch] / m;
                    let mean_dy_xhat = sum_dy_xhat[ch] / m;
                    for (g, &xv) in gin.iter_mut().zip(xh) {
                        *g = scale * (*g - mean_dy - xv * mean_dy_xhat);
                    }
                }
            }
        }
        grad_in.ensure_finite("batchnorm backward")?;
        Ok(grad_in)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor::from_fn(shape, |_| rng.gen_range(-2.0..3.0))
    }

    #[test]
    fn train_output_is_standardized() {
        let mut bn = BatchNorm::<f32>::new(3, DEFAULT_EPSILON, DEFAULT_MOMENTUM);
        let x = random(&[4, 3, 5, 5], 1).cast::<f32>();
        let y = bn.forward(&x, Mode::Train).unwrap();
        for ch in 0..3 {
            let vals: Vec<f64> = (0..4)
                .flat_map(|n| y.data()[(n * 3 + ch) * 25..][..25].to_vec())
                .map(f64::from)
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
            assert!(mean.abs() < 1e-5, "mean {mean}");
            assert!((var - 1.0).abs() < 1e-3, "var {var}");
        }
    }

    #[test]
    fn constant_channel_maps_to_beta() {
        let mut bn = BatchNorm::<f32>::new(2, DEFAULT_EPSILON, DEFAULT_MOMENTUM);
        bn.beta.data_mut().copy_from_slice(&[0.25, -1.5]);
        let x = Tensor::<f32>::full(&[3, 2, 2, 2], 4.0);
        let y = bn.forward(&x, Mode::Train).unwrap();
        for (i, v) in y.data().iter().enumerate() {
            let ch = (i / 4) % 2;
            assert_eq!(*v, bn.beta.data()[ch]);
        }
    }

    #[test]
    fn infer_is_repeatable_and_uses_initial_stats() {
        let bn = BatchNorm::<f32>::new(3, DEFAULT_EPSILON, DEFAULT_MOMENTUM);
        let x = random(&[2, 3, 4, 4], 2).cast::<f32>();
        let a = bn.infer(&x).unwrap();
        let b = bn.infer(&x).unwrap();
        assert_eq!(a, b);
        // mean 0, var 1 → x / sqrt(1 + eps)
        let scale = 1.0 / (1.0f32 + 1e-5).sqrt();
        assert!((a.data()[0] - x.data()[0] * scale).abs() < 1e-6);
    }

    #[test]
    fn running_stats_track_batch() {
        let mut bn = BatchNorm::<f64>::new(1, DEFAULT_EPSILON, 0.9);
        let x = Tensor::new(vec![4, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        assert!((bn.running_mean.data()[0] - 0.25).abs() < 1e-12);
        // unbiased var of 1..4 = 5/3
        assert!((bn.running_var.data()[0] - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn single_value_per_channel_rejected_in_train_mode() {
        let mut bn = BatchNorm::<f32>::new(2, DEFAULT_EPSILON, DEFAULT_MOMENTUM);
        let x = Tensor::zeros(&[1, 2]);
        assert!(bn.forward(&x, Mode::Train).is_err());
        assert!(bn.forward(&x, Mode::Infer).is_ok());
    }

    #[test]
    fn grad_beta_is_channel_sum_and_zero_upstream_is_zero() {
        let mut bn = BatchNorm::<f64>::new(3, DEFAULT_EPSILON, DEFAULT_MOMENTUM);
        let x = random(&[2, 3, 2, 2], 3);
        let g = random(&[2, 3, 2, 2], 4);
        bn.forward(&x, Mode::Train).unwrap();
        bn.backward(&g).unwrap();
        for ch in 0..3 {
            let expected: f64 = (0..2).flat_map(|n| g.data()[(n * 3 + ch) * 4..][..4].to_vec()).sum();
            assert!((bn.grad_beta.data()[ch] - expected).abs() < 1e-12);
        }

        bn.forward(&x, Mode::Train).unwrap();
        let gin = bn.backward(&Tensor::zeros(&[2, 3, 2, 2])).unwrap();
        assert!(gin.data().iter().all(|&v| v == 0.0));
        assert!(bn.grad_gamma.data().iter().all(|&v| v == 0.0));
        assert!(bn.grad_beta.data().iter().all(|&v| v == 0.0));
    }
}
