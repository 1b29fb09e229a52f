use super::tensor::Scalar;
use super::NnError;

/// Probability clamp applied before taking logarithms.
pub const BCE_EPS: f64 = 1e-7;

fn check<T: Scalar>(pred: &[T], target: &[T]) -> Result<(), NnError> {
    if pred.is_empty() {
        return Err(NnError::EmptyInput { op: "bce_loss" });
    }
    if pred.len() != target.len() {
        return Err(NnError::Dim {
            op: "bce_loss",
            axis: "elements",
            expected: pred.len(),
            got: target.len(),
        });
    }
    Ok(())
}

/// Mean binary cross-entropy `-mean(t ln p + (1 - t) ln(1 - p))` with `p`
/// clamped to `[eps, 1 - eps]`. Accumulates in `f64`.
pub fn bce_loss<T: Scalar>(pred: &[T], target: &[T], eps: f64) -> Result<f64, NnError> {
    check(pred, target)?;
    let mut total = 0.0f64;
    for (&p, &t) in pred.iter().zip(target) {
        let p = p.as_f64().clamp(eps, 1.0 - eps);
        let t = t.as_f64();
        total -= t * p.ln() + (1.0 - t) * (1.0 - p).ln();
    }
    Ok(total / pred.len() as f64)
}

/// `dL/dp` of [`bce_loss`], evaluated at the clamped probability.
pub fn bce_grad<T: Scalar>(pred: &[T], target: &[T], eps: f64) -> Result<Vec<T>, NnError> {
    check(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.as_f64().clamp(eps, 1.0 - eps);
            let t = t.as_f64();
            T::from_f64_lossy((p - t) / (p * (1.0 - p)) / n)
        })
        .collect())
}
