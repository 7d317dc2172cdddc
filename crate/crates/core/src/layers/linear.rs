//! Fully-connected layer: `y = x · Wᵀ + b` with `W` shaped `[out, in]`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug)]
pub struct Linear<T: Real = f32> {
    pub(crate) weight: Tensor<T>,
    pub(crate) bias: Tensor<T>,
    pub(crate) grad_weight: Tensor<T>,
    pub(crate) grad_bias: Tensor<T>,
    cached_input: Option<Tensor<T>>,
}

impl<T: Real> Linear<T> {
    pub fn new(in_features: usize, out_features: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[out_features, in_features]),
            bias: Tensor::zeros(&[out_features]),
            grad_weight: Tensor::zeros(&[out_features, in_features]),
            grad_bias: Tensor::zeros(&[out_features]),
            cached_input: None,
        }
    }

    /// Kaiming-uniform weights, zero bias.
    pub fn init<R: Rng>(in_features: usize, out_features: usize, rng: &mut R) -> Self {
        let mut layer = Self::new(in_features, out_features);
        let bound = (6.0 / in_features as f64).sqrt();
        for w in layer.weight.data_mut() {
            *w = T::from_f64(rng.gen_range(-bound..bound));
        }
        layer
    }

    pub fn from_params(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let (m, d) = weight.dims2()?;
        if bias.shape() != [m] {
            return Err(Error::shape("linear bias", [m], bias.shape()));
        }
        let mut layer = Self::new(d, m);
        layer.weight = weight;
        layer.bias = bias;
        Ok(layer)
    }

    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
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

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, d) = x.dims2()?;
        if d != self.in_features() {
            return Err(Error::shape("linear input features", self.in_features(), d));
        }
        let m = self.out_features();
        let mut out = Vec::with_capacity(n * m);
        for _ in 0..n {
            out.extend_from_slice(self.bias.data());
        }
        T::gemm_raw(
            n,
            d,
            m,
            T::one(),
            x.data(),
            d,
            1,
            self.weight.data(),
            1,
            d,
            T::one(),
            &mut out,
            m,
            1,
        );
        let out = Tensor::new(vec![n, m], out)?;
        out.ensure_finite("linear forward")?;
        Ok(out)
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let out = self.infer(x)?;
        self.cached_input = Some(x.clone());
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let x = self
            .cached_input
            .take()
            .ok_or_else(|| Error::State("linear backward called before forward".into()))?;
        let (n, d) = x.dims2()?;
        let m = self.out_features();
        if grad_out.shape() != [n, m] {
            return Err(Error::shape("linear grad_out", [n, m], grad_out.shape()));
        }
        let g = grad_out.data();
        // dW = dYᵀ[M, N] · X[N, D]
        T::gemm_raw(
            m,
            n,
            d,
            T::one(),
            g,
            1,
            m,
            x.data(),
            d,
            1,
            T::zero(),
            self.grad_weight.data_mut(),
            d,
            1,
        );
        let gb = self.grad_bias.data_mut();
        gb.fill(T::zero());
        for row in g.chunks_exact(m) {
            for (b, &v) in gb.iter_mut().zip(row) {
                *b = *b + v;
            }
        }
        // dX = dY[N, M] · W[M, D]
        let mut grad_in = vec![T::zero(); n * d];
        T::gemm_raw(
            n,
            m,
            d,
            T::one(),
            g,
            m,
            1,
            self.weight.data(),
            d,
            1,
            T::zero(),
            &mut grad_in,
            d,
            1,
        );
        let grad_in = Tensor::new(vec![n, d], grad_in)?;
        grad_in.ensure_finite("linear backward")?;
        Ok(grad_in)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_weight_passes_input_through() {
        let eye = Tensor::<f32>::from_fn(&[4, 4], |i| if i % 5 == 0 { 1.0 } else { 0.0 });
        let lin = Linear::from_params(eye, Tensor::zeros(&[4])).unwrap();
        let x = Tensor::<f32>::from_fn(&[3, 4], |i| i as f32 - 5.5);
        assert_eq!(lin.infer(&x).unwrap(), x);
    }

    #[test]
    fn output_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lin = Linear::<f32>::init(2048, 64, &mut rng);
        let y = lin.infer(&Tensor::zeros(&[1, 2048])).unwrap();
        assert_eq!(y.shape(), [1, 64]);
    }

    #[test]
    fn hand_computed_product() {
        let w = Tensor::<f64>::new(vec![2, 3], vec![1.0, 2.0, 3.0, -1.0, 0.0, 1.0]).unwrap();
        let b = Tensor::new(vec![2], vec![0.5, -0.5]).unwrap();
        let mut lin = Linear::from_params(w, b).unwrap();
        let x = Tensor::new(vec![1, 3], vec![1.0, 1.0, 2.0]).unwrap();
        assert_eq!(lin.forward(&x).unwrap().data(), [9.5, 0.5]);
        let gin = lin.backward(&Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(gin.data(), [-1.0, 2.0, 5.0]);
        assert_eq!(lin.grad_weight.data(), [1.0, 1.0, 2.0, 2.0, 2.0, 4.0]);
        assert_eq!(lin.grad_bias.data(), [1.0, 2.0]);
    }
}
