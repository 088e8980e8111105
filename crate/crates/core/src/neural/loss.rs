use super::tensor::Tensor4;
use crate::error::{Error, Result};

/// Predictions are clamped to `[EPS, 1 - EPS]` before taking logarithms.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// Binary cross-entropy on sigmoid outputs.
    Bce,
    /// Mean squared error, averaged over the output elements.
    Mse,
}

impl Loss {
    /// Loss of one item; writes dL/d(output) into `grad`.
    pub fn item(self, out: &[f64], target: &[f64], grad: &mut [f64]) -> Result<f64> {
        if out.len() != target.len() || out.is_empty() {
            return Err(Error::Usage(format!(
                "loss over {} outputs and {} targets",
                out.len(),
                target.len()
            )));
        }
        let n = out.len() as f64;
        let mut total = 0.0;
        match self {
            Loss::Bce => {
                for ((g, &p), &y) in grad.iter_mut().zip(out).zip(target) {
                    let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                    total -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
                    *g = if pc == p { (-y / p + (1.0 - y) / (1.0 - p)) / n } else { 0.0 };
                }
            }
            Loss::Mse => {
                for ((g, &p), &y) in grad.iter_mut().zip(out).zip(target) {
                    let d = p - y;
                    total += d * d;
                    *g = 2.0 * d / n;
                }
            }
        }
        Ok(total / n)
    }
}

/// Mean binary cross-entropy of predictions against 0/1 labels.
pub fn bce_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() || predictions.is_empty() {
        return Err(Error::Usage(format!(
            "bce over {} predictions and {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Per-item squared reconstruction error normalized by the pixel count,
/// averaged over the batch.
pub fn mse_loss(x: &Tensor4, y: &Tensor4) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::Usage(format!(
            "mse over shapes {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    if x.batch == 0 || x.item.is_empty() {
        return Err(Error::Usage("mse over an empty batch".into()));
    }
    let total: f64 = x.values.iter().zip(&y.values).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(total / x.values.len() as f64)
}

/// Per-item reconstruction error, the autoencoder's detection statistic.
pub fn reconstruction_error(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::tensor::Shape3;
    use proptest::prelude::*;

    #[test]
    fn bce_reference_values() {
        assert!(bce_loss(&[1.0], &[1.0]).unwrap() <= 1.2e-7);
        assert!((bce_loss(&[0.5, 0.5], &[1.0, 0.0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((bce_loss(&[0.9], &[0.0]).unwrap() - 2.302585).abs() < 1e-5);
        assert!(matches!(bce_loss(&[0.5], &[1.0, 0.0]), Err(Error::Usage(_))));
    }

    #[test]
    fn mse_reference_values() {
        let ones = Tensor4::from_values(2, Shape3::new(2, 2, 1), vec![1.0; 8]).unwrap();
        let zeros = Tensor4::zeros(2, Shape3::new(2, 2, 1));
        assert_eq!(mse_loss(&ones, &ones).unwrap(), 0.0);
        assert_eq!(mse_loss(&ones, &zeros).unwrap(), 1.0);
        let a = Tensor4::from_values(1, Shape3::flat(2), vec![1.0, 0.0]).unwrap();
        let b = Tensor4::zeros(1, Shape3::flat(2));
        assert_eq!(mse_loss(&a, &b).unwrap(), 0.5);
        assert!(matches!(mse_loss(&a, &zeros), Err(Error::Usage(_))));
    }

    #[test]
    fn item_loss_agrees_with_batch_functions() {
        let mut g = [0.0];
        assert_eq!(Loss::Bce.item(&[0.3], &[1.0], &mut g).unwrap(), bce_loss(&[0.3], &[1.0]).unwrap());
        let mut g2 = [0.0; 2];
        assert_eq!(Loss::Mse.item(&[1.0, 0.0], &[0.0, 0.0], &mut g2).unwrap(), 0.5);
    }

    proptest! {
        #[test]
        fn mse_is_symmetric(v in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..40)) {
            let n = v.len();
            let a = Tensor4::from_values(1, Shape3::flat(n), v.iter().map(|p| p.0).collect()).unwrap();
            let b = Tensor4::from_values(1, Shape3::flat(n), v.iter().map(|p| p.1).collect()).unwrap();
            prop_assert_eq!(mse_loss(&a, &b).unwrap(), mse_loss(&b, &a).unwrap());
        }

        #[test]
        fn bce_is_non_negative(p in 0.0f64..=1.0, y in 0u8..=1) {
            prop_assert!(bce_loss(&[p], &[y as f64]).unwrap() >= 0.0);
        }
    }
}
