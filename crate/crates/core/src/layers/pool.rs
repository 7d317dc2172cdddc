//! Non-overlapping 2×2 max pooling, stride 2.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug, Default)]
pub struct MaxPool2x2<T: Real = f32> {
    cache: Option<(Vec<usize>, Vec<usize>)>,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Real> MaxPool2x2<T> {
    pub fn new() -> Self {
        Self {
            cache: None,
            _marker: std::marker::PhantomData,
        }
    }

    /// Pooled output plus, per output element, the flat input index it came
    /// from. Ties go to the first element in row-major window order.
    pub fn pool(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
        let (n, c, h, w) = x.dims4()?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(Error::shape("maxpool2x2 input", "even H and W", x.shape()));
        }
        let (oh, ow) = (h / 2, w / 2);
        let data = x.data();
        let mut out = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(out.capacity());
        for plane in 0..n * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let top = base + 2 * oy * w + 2 * ox;
                    let mut best = top;
                    for idx in [top + 1, top + w, top + w + 1] {
                        if data[idx] > data[best] {
                            best = idx;
                        }
                    }
                    out.push(data[best]);
                    argmax.push(best);
                }
            }
        }
        Ok((Tensor::new(vec![n, c, oh, ow], out)?, argmax))
    }

    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(Self::pool(x)?.0)
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (out, argmax) = Self::pool(x)?;
        self.cache = Some((x.shape().to_vec(), argmax));
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let (in_shape, argmax) = self
            .cache
            .take()
            .ok_or_else(|| Error::State("maxpool backward called before forward".into()))?;
        route_to_argmax(grad_out, &in_shape, &argmax)
    }
}

/// Send each upstream gradient to the input position recorded in `argmax`.
pub fn route_to_argmax<T: Real>(grad_out: &Tensor<T>, in_shape: &[usize], argmax: &[usize]) -> Result<Tensor<T>> {
    if grad_out.len() != argmax.len() {
        return Err(Error::shape("maxpool grad_out", argmax.len(), grad_out.len()));
    }
    let mut grad_in = Tensor::zeros(in_shape);
    let gin = grad_in.data_mut();
    for (&g, &idx) in grad_out.data().iter().zip(argmax) {
        gin[idx] = gin[idx] + g;
    }
    Ok(grad_in)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn picks_window_max() {
        let x = Tensor::<f32>::new(vec![1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, arg) = MaxPool2x2::pool(&x).unwrap();
        assert_eq!(y.data(), [4.0]);
        assert_eq!(arg, [3]);
    }

    #[test]
    fn ties_resolve_to_first_element() {
        let x = Tensor::<f32>::full(&[1, 1, 2, 2], 7.0);
        let (y, arg) = MaxPool2x2::pool(&x).unwrap();
        assert_eq!(y.data(), [7.0]);
        assert_eq!(arg, [0]);
    }

    #[test]
    fn halves_spatial_dims() {
        let x = Tensor::<f32>::zeros(&[1, 1, 32, 32]);
        assert_eq!(MaxPool2x2::pool(&x).unwrap().0.shape(), [1, 1, 16, 16]);
    }

    #[test]
    fn odd_dims_rejected() {
        let x = Tensor::<f32>::zeros(&[1, 1, 3, 4]);
        assert!(matches!(MaxPool2x2::pool(&x), Err(Error::Shape { .. })));
    }

    #[test]
    fn single_window_routes_to_argmax() {
        let mut pool = MaxPool2x2::<f32>::new();
        let x = Tensor::new(vec![1, 1, 2, 2], vec![0.5, 9.0, -1.0, 3.0]).unwrap();
        pool.forward(&x).unwrap();
        let g = pool.backward(&Tensor::full(&[1, 1, 1, 1], 2.5)).unwrap();
        assert_eq!(g.data(), [0.0, 2.5, 0.0, 0.0]);
    }

    #[test]
    fn backward_conserves_gradient_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let x = Tensor::<f32>::from_fn(&[2, 3, 6, 8], |_| rng.gen_range(-1.0..1.0));
            let mut pool = MaxPool2x2::new();
            pool.forward(&x).unwrap();
            // Integer-valued gradients make every summation order exact.
            let g = Tensor::<f32>::from_fn(&[2, 3, 3, 4], |_| rng.gen_range(-50..50) as f32);
            let gin = pool.backward(&g).unwrap();
            assert_eq!(gin.sum(), g.sum());
            let zeros = Tensor::<f32>::zeros(&[2, 3, 3, 4]);
            pool.forward(&x).unwrap();
            assert!(pool.backward(&zeros).unwrap().data().iter().all(|&v| v == 0.0));
        }
    }
}
