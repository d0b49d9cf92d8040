use super::tensor::{Scalar, Tensor};
use crate::{Error, Result};

/// Numerically stable softmax over a 1-D tensor.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let max = logits
        .data()
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    Tensor::new(&[exps.len()], exps.into_iter().map(|e| e / sum).collect()).expect("softmax shape")
}

/// Cross-entropy of `softmax(logits)` against `label`.
///
/// Returns `(loss, probs)`; the gradient with respect to the logits is
/// `probs - onehot(label)`.
pub fn softmax_xent<T: Scalar>(logits: &Tensor<T>, label: usize) -> Result<(T, Tensor<T>)> {
    let c = logits.len();
    if label >= c {
        return Err(Error::Argument(format!("label {label} out of range for {c} classes")));
    }
    let max = logits
        .data()
        .iter()
        .copied()
        .fold(T::neg_infinity(), T::max);
    let log_sum = logits
        .data()
        .iter()
        .map(|&z| (z - max).exp())
        .sum::<T>()
        .ln();
    let loss = -(logits.data()[label] - max - log_sum);
    Ok((loss, softmax(logits)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        let (loss, p) = softmax_xent(&Tensor::<f64>::full(&[10], 0.3), 4).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        assert!(p.data().iter().all(|&v| (v - 0.1).abs() < 1e-12));
    }

    #[test]
    fn confident_correct_is_near_zero() {
        let (loss, p) = softmax_xent(&Tensor::<f64>::from_vec(vec![1000.0, 0.0]), 0).unwrap();
        assert!(loss.abs() < 1e-12);
        assert!((p.data().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn label_out_of_range() {
        assert!(matches!(
            softmax_xent(&Tensor::<f64>::zeros(&[3]), 3),
            Err(Error::Argument(_))
        ));
    }
}
