use crate::error::{Error, Result};
use crate::tensor::{ops, Scalar, Tensor};

/// Convert 1-based class ids to 0-based targets, rejecting unlabeled pixels.
pub fn targets(labels: &[u16], classes: usize) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|&l| match l {
            0 => Err(Error::Usage("unlabeled pixel (class 0) in a training batch".into())),
            l if l as usize > classes => Err(Error::Range(format!("label {l} exceeds {classes} classes"))),
            l => Ok(l as usize - 1),
        })
        .collect()
}

/// Mean softmax cross-entropy of `n×K` logits against class ids `1..=K`.
pub fn cross_entropy<S: Scalar>(logits: &Tensor<S>, labels: &[u16]) -> Result<S> {
    let k = *logits.shape().last().unwrap_or(&0);
    ops::cross_entropy(logits, &targets(labels, k)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let l = Tensor::<f64>::from_f64(&[2, 4], &[0.3; 8]).unwrap();
        assert!((cross_entropy(&l, &[1, 4]).unwrap() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_logits_stay_finite() {
        let l = Tensor::<f32>::from_f64(&[1, 3], &[1e4, -1e4, 0.0]).unwrap();
        let loss = cross_entropy(&l, &[1]).unwrap();
        assert!(loss.is_finite() && (0.0..1e-6).contains(&loss));
        let wrong = cross_entropy(&l, &[2]).unwrap();
        assert!(wrong.is_finite() && wrong > 1e4);
    }

    #[test]
    fn unlabeled_is_usage_error() {
        let l = Tensor::<f32>::zeros(&[2, 3]);
        assert!(matches!(cross_entropy(&l, &[1, 0]), Err(Error::Usage(_))));
        assert!(matches!(cross_entropy(&l, &[1, 4]), Err(Error::Range(_))));
    }
}
