//! Inverted dropout: survivors are scaled by `1 / (1 − rate)` at train time,
//! infer mode is the identity.

use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::Mode;
use crate::tensor::{Real, Tensor};

#[derive(Clone, Debug)]
pub struct Dropout<T: Real = f32> {
    rate: f64,
    mask: Option<Vec<T>>,
}

impl<T: Real> Dropout<T> {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { rate, mask: None })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn forward<R: Rng>(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Tensor<T> {
        if mode == Mode::Infer || self.rate == 0.0 {
            self.mask = Some(vec![T::one(); x.len()]);
            return x.clone();
        }
        let keep_scale = T::from_f64(1.0 / (1.0 - self.rate));
        let mask: Vec<T> = (0..x.len())
            .map(|_| {
                if rng.gen::<f64>() < self.rate {
                    T::zero()
                } else {
                    keep_scale
                }
            })
            .collect();
        let mut out = x.clone();
        for (v, &m) in out.data_mut().iter_mut().zip(&mask) {
            *v = *v * m;
        }
        self.mask = Some(mask);
        out
    }

    pub fn backward(&mut self, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
        let mask = self
            .mask
            .take()
            .ok_or_else(|| Error::State("dropout backward called before forward".into()))?;
        if mask.len() != grad_out.len() {
            return Err(Error::shape("dropout grad_out", mask.len(), grad_out.len()));
        }
        let mut grad = grad_out.clone();
        for (g, &m) in grad.data_mut().iter_mut().zip(&mask) {
            *g = *g * m;
        }
        Ok(grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn infer_and_zero_rate_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Tensor::<f32>::from_fn(&[4, 8], |i| i as f32 * 0.37 - 3.0);
        let mut d = Dropout::new(0.5).unwrap();
        assert_eq!(d.forward(&x, Mode::Infer, &mut rng), x);
        let mut d0 = Dropout::new(0.0).unwrap();
        assert_eq!(d0.forward(&x, Mode::Train, &mut rng), x);
    }

    #[test]
    fn rate_outside_unit_interval_rejected() {
        assert!(Dropout::<f32>::new(1.0).is_err());
        assert!(Dropout::<f32>::new(-0.1).is_err());
    }

    #[test]
    fn half_rate_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let x = Tensor::<f32>::from_fn(&[1_000_000], |i| 1.0 + (i % 7) as f32);
        let mut d = Dropout::new(0.5).unwrap();
        let y = d.forward(&x, Mode::Train, &mut rng);
        let mut survivors = 0usize;
        for (&o, &i) in y.data().iter().zip(x.data()) {
            if o != 0.0 {
                survivors += 1;
                assert_eq!(o, 2.0 * i);
            }
        }
        let frac = survivors as f64 / 1e6;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn backward_applies_same_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::<f64>::full(&[64], 1.0);
        let mut d = Dropout::new(0.25).unwrap();
        let y = d.forward(&x, Mode::Train, &mut rng);
        let g = d.backward(&Tensor::full(&[64], 1.0)).unwrap();
        assert_eq!(g, y);
    }
}
