//! 3×3 convolution, stride 1, zero padding 1 (spatial size preserved).
//!
//! Forward and backward unfold each sample into a `[C·9, H·W]` column matrix
//! and hand the products to GEMM. The unfolded matrix is rebuilt during
//! backward from the cached input rather than cached itself.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

const TAPS: usize = 9;

#[derive(Clone, Debug)]
pub struct Conv3x3<T: Real = f32> {
    pub(crate) weight: Tensor<T>,
    pub(crate) bias: Tensor<T>,
    pub(crate) grad_weight: Tensor<T>,
    pub(crate) grad_bias: Tensor<T>,
    cached_input: Option<Tensor<T>>,
}

impl<T: Real> Conv3x3<T> {
    pub fn new(in_channels: usize, out_channels: usize) -> Self {
        let wshape = [out_channels, in_channels, 3, 3];
        Self {
            weight: Tensor::zeros(&wshape),
            bias: Tensor::zeros(&[out_channels]),
            grad_weight: Tensor::zeros(&wshape),
            grad_bias: Tensor::zeros(&[out_channels]),
            cached_input: None,
        }
    }

    /// Kaiming-uniform weights (bound `sqrt(6 / fan_in)`), zero bias.
    pub fn init<R: Rng>(in_channels: usize, out_channels: usize, rng: &mut R) -> Self {
        let mut layer = Self::new(in_channels, out_channels);
        let bound = (6.0 / (in_channels * TAPS) as f64).sqrt();
        for w in layer.weight.data_mut() {
            *w = T::from_f64(rng.gen_range(-bound..bound));
        }
        layer
    }

    pub fn from_params(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let [k, c, 3, 3] = weight.shape()[..] else {
            return Err(Error::shape("conv3x3 weight", "[K, C, 3, 3]", weight.shape()));
        };
        if bias.shape() != [k] {
            return Err(Error::shape("conv3x3 bias", [k], bias.shape()));
        }
        let mut layer = Self::new(c, k);
        layer.weight = weight;
        layer.bias = bias;
        Ok(layer)
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn weight(&self) -> &Tensor<T> {
        &self.weight
    }

    pub fn bias(&self) -> &Tensor<T> {
        &self.bias
    }

    pub fn grad_weight(&self) -> &Tensor<T> {
        &self.grad_weight
    }

    pub fn grad_bias(&self) -> &Tensor<T> {
        &self.grad_bias
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<(usize, usize, usize, usize)> {
        let (n, c, h, w) = input.dims4()?;
        if c != self.in_channels() {
            return Err(Error::shape("conv3x3 input channels", self.in_channels(), c));
        }
        Ok((n, c, h, w))
    }

    pub fn infer(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, h, w) = self.check_input(input)?;
        let k = self.out_channels();
        let hw = h * w;
        let mut out = vec![T::zero(); n * k * hw];
        let mut cols = vec![T::zero(); c * TAPS * hw];
        for (sample, out_n) in input.data().chunks_exact(c * hw).zip(out.chunks_exact_mut(k * hw)) {
            im2col(sample, c, h, w, &mut cols);
            for (row, &b) in out_n.chunks_exact_mut(hw).zip(self.bias.data()) {
                row.fill(b);
            }
            T::gemm_raw(
                k,
                c * TAPS,
                hw,
                T::one(),
                self.weight.data(),
                c * TAPS,
                1,
                &cols,
                hw,
                1,
                T::one(),
                out_n,
                hw,
                1,
            );
        }
        let out = Tensor::new(vec![n, k, h, w], out)?;
        out.ensure_finite("conv3x3 forward")?;
        Ok(out)
    }

    pub fn forward(&mut self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let out = self.infer(input)?;
        self.cached_input = Some(input.clone());
        Ok(out)
    }

    /// Sets `grad_weight`/`grad_bias` and returns the input gradient.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let input = self
            .cached_input
            .take()
            .ok_or_else(|| Error::State("conv3x3 backward called before forward".into()))?;
        let (n, c, h, w) = input.dims4()?;
        let k = self.out_channels();
        if grad_out.shape() != [n, k, h, w] {
            return Err(Error::shape("conv3x3 grad_out", [n, k, h, w], grad_out.shape()));
        }
        let hw = h * w;
        let ctaps = c * TAPS;

        self.grad_weight.data_mut().fill(T::zero());
        self.grad_bias.data_mut().fill(T::zero());
        let mut grad_in = vec![T::zero(); n * c * hw];
        let mut cols = vec![T::zero(); ctaps * hw];
        let mut dcols = vec![T::zero(); ctaps * hw];

        for ((sample, g_n), gin_n) in input
            .data()
            .chunks_exact(c * hw)
            .zip(grad_out.data().chunks_exact(k * hw))
            .zip(grad_in.chunks_exact_mut(c * hw))
        {
            for (gb, row) in self.grad_bias.data_mut().iter_mut().zip(g_n.chunks_exact(hw)) {
                *gb = *gb + row.iter().copied().sum::<T>();
            }
            im2col(sample, c, h, w, &mut cols);
            // dW += dY[K, HW] · colsᵀ[HW, C·9]
            T::gemm_raw(
                k,
                hw,
                ctaps,
                T::one(),
                g_n,
                hw,
                1,
                &cols,
                1,
                hw,
                T::one(),
                self.grad_weight.data_mut(),
                ctaps,
                1,
            );
            // dcols = Wᵀ[C·9, K] · dY[K, HW]
            T::gemm_raw(
                ctaps,
                k,
                hw,
                T::one(),
                self.weight.data(),
                1,
                ctaps,
                g_n,
                hw,
                1,
                T::zero(),
                &mut dcols,
                hw,
                1,
            );
            col2im(&dcols, c, h, w, gin_n);
        }

        let grad_in = Tensor::new(vec![n, c, h, w], grad_in)?;
        grad_in.ensure_finite("conv3x3 backward")?;
        Ok(grad_in)
    }
}

/// Unfold one `[C, H, W]` sample into `cols[(c·9 + dy·3 + dx)·HW + y·W + x]`.
fn im2col<T: Real>(sample: &[T], c: usize, h: usize, w: usize, cols: &mut [T]) {
    let hw = h * w;
    for ch in 0..c {
        let plane = &sample[ch * hw..(ch + 1) * hw];
        for dy in 0..3 {
            for dx in 0..3 {
                let row = &mut cols[(ch * TAPS + dy * 3 + dx) * hw..][..hw];
                for y in 0..h {
                    let dst = &mut row[y * w..(y + 1) * w];
                    let sy = y + dy;
                    if sy < 1 || sy > h {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[(sy - 1) * w..sy * w];
                    match dx {
                        0 => {
                            dst[0] = T::zero();
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatter-add columns back onto a `[C, H, W]` sample.
fn col2im<T: Real>(cols: &[T], c: usize, h: usize, w: usize, out: &mut [T]) {
    let hw = h * w;
    for ch in 0..c {
        let plane = &mut out[ch * hw..(ch + 1) * hw];
        for dy in 0..3 {
            for dx in 0..3 {
                let row = &cols[(ch * TAPS + dy * 3 + dx) * hw..][..hw];
                for y in 0..h {
                    let sy = y + dy;
                    if sy < 1 || sy > h {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[(sy - 1) * w..sy * w];
                    match dx {
                        0 => {
                            for (d, &s) in dst[..w - 1].iter_mut().zip(&src[1..]) {
                                *d = *d + s;
                            }
                        }
                        1 => {
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d = *d + s;
                            }
                        }
                        _ => {
                            for (d, &s) in dst[1..].iter_mut().zip(&src[..w - 1]) {
                                *d = *d + s;
                            }
                        }
                    }
                }
            }
        }
    }
}
