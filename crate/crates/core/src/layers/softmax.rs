use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Row-wise softmax of `[N, K]` logits, stabilized by subtracting the row max.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, k) = logits.dims2()?;
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total = total + *v;
        }
        for v in row.iter_mut() {
            *v = *v / total;
        }
    }
    out.ensure_finite("softmax")?;
    Ok(out)
}

/// Mean negative log-likelihood and its gradient `(softmax − onehot) / N`.
pub fn softmax_cross_entropy<T: Real>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let (n, k) = logits.dims2()?;
    if labels.len() != n {
        return Err(Error::shape("cross-entropy labels", n, labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Data(format!("label {bad} out of range for {k} classes")));
    }
    let scale = T::one() / T::from_f64(n as f64);
    let mut grad = softmax(logits)?;
    let mut loss = T::zero();
    for ((row, probs), &label) in logits
        .data()
        .chunks_exact(k)
        .zip(grad.data_mut().chunks_exact_mut(k))
        .zip(labels)
    {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let log_total = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        loss = loss - (row[label] - max - log_total);
        probs[label] = probs[label] - T::one();
        for p in probs.iter_mut() {
            *p = *p * scale;
        }
    }
    let loss = loss * scale;
    if !loss.is_finite() {
        return Err(Error::NonFinite("cross-entropy loss".into()));
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn symmetric_logits() {
        let logits = Tensor::<f64>::zeros(&[1, 2]);
        let (loss, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(softmax(&logits).unwrap().data(), [0.5, 0.5]);
    }

    #[test]
    fn extreme_logits_do_not_overflow() {
        let logits = Tensor::<f32>::new(vec![1, 2], vec![1000.0, -1000.0]).unwrap();
        let p = softmax(&logits).unwrap();
        assert!((p.data()[0] - 1.0).abs() < 1e-6);
        assert!(p.data()[1] >= 0.0 && p.data()[1] < 1e-6);
        let (loss, grad) = softmax_cross_entropy(&logits, &[1]).unwrap();
        assert!((loss - 2000.0).abs() < 1e-2);
        assert!(grad.all_finite());
    }

    #[test]
    fn rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let logits = Tensor::<f32>::from_fn(&[64, 2], |_| rng.gen_range(-30.0..30.0));
        let p = softmax(&logits).unwrap();
        for row in p.data().chunks_exact(2) {
            assert!((row[0] + row[1] - 1.0).abs() <= 1e-6);
            assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let logits = Tensor::<f64>::from_fn(&[4, 2], |_| rng.gen_range(-3.0..3.0));
        let labels = [0, 1, 1, 0];
        let (_, grad) = softmax_cross_entropy(&logits, &labels).unwrap();
        let h = 1e-5;
        for i in 0..logits.len() {
            let mut plus = logits.clone();
            plus.data_mut()[i] += h;
            let mut minus = logits.clone();
            minus.data_mut()[i] -= h;
            let numeric = (softmax_cross_entropy(&plus, &labels).unwrap().0
                - softmax_cross_entropy(&minus, &labels).unwrap().0)
                / (2.0 * h);
            let analytic = grad.data()[i];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
            assert!(rel < 1e-3, "{i}: {numeric} vs {analytic}");
        }
    }

    #[test]
    fn rejects_out_of_range_label() {
        let logits = Tensor::<f32>::zeros(&[1, 2]);
        assert!(softmax_cross_entropy(&logits, &[2]).is_err());
    }
}
