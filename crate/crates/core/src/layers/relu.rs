use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug, Default)]
pub struct Relu<T: Real = f32> {
    cached_input: Option<Tensor<T>>,
}

impl<T: Real> Relu<T> {
    pub fn new() -> Self {
        Self { cached_input: None }
    }

    pub fn infer(&self, x: &Tensor<T>) -> Tensor<T> {
        x.map(|v| v.max(T::zero()))
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Tensor<T> {
        self.cached_input = Some(x.clone());
        self.infer(x)
    }

    /// Passes the gradient where the input was strictly positive.
    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let input = self
            .cached_input
            .take()
            .ok_or_else(|| Error::State("relu backward called before forward".into()))?;
        if input.shape() != grad_out.shape() {
            return Err(Error::shape("relu grad_out", input.shape(), grad_out.shape()));
        }
        let mut grad = grad_out.clone();
        for (g, &x) in grad.data_mut().iter_mut().zip(input.data()) {
            if x <= T::zero() {
                *g = T::zero();
            }
        }
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn forward_and_backward_on_kink() {
        let mut relu = Relu::<f32>::new();
        let x = Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu.forward(&x).data(), [0.0, 0.0, 2.0]);
        let g = Tensor::full(&[3], 5.0);
        assert_eq!(relu.backward(&g).unwrap().data(), [0.0, 0.0, 5.0]);
    }

    proptest! {
        #[test]
        fn idempotent(values in prop::collection::vec(-1e3f32..1e3, 1..64)) {
            let relu = Relu::<f32>::new();
            let x = Tensor::new(vec![values.len()], values).unwrap();
            let once = relu.infer(&x);
            prop_assert_eq!(relu.infer(&once), once);
        }
    }
}
