use crate::error::{Error, Result};
use crate::tensor::{BackwardOp, Real, Tensor};

pub const BCE_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy of probabilities against 0/1 targets.
///
/// Scores are clamped to `[1e-7, 1 - 1e-7]` before the logarithms. The
/// backward pass uses the clamped value, so saturated scores still push
/// toward the target.
pub fn bce_loss<T: Real>(scores: &Tensor<T>, targets: &[T]) -> Result<Tensor<T>> {
    if scores.numel() != targets.len() {
        return Err(Error::dim(
            "bce_loss",
            format!("{} scores vs {} targets", scores.numel(), targets.len()),
        ));
    }
    if let Some(bad) = targets.iter().find(|&&t| t != T::zero() && t != T::one()) {
        return Err(Error::contract(format!("bce target {bad} is not 0 or 1")));
    }
    let lo = T::lit(BCE_CLAMP);
    let hi = T::one() - lo;
    let clamped: Vec<T> = scores.data().iter().map(|&s| s.max(lo).min(hi)).collect();
    let n = T::from_usize(targets.len()).unwrap();
    let total: T = clamped
        .iter()
        .zip(targets)
        .map(|(&s, &t)| -(t * s.ln() + (T::one() - t) * (T::one() - s).ln()))
        .sum();
    Ok(Tensor::from_op(
        vec![1],
        vec![total / n],
        vec![scores.clone()],
        BceBackward {
            clamped,
            targets: targets.to_vec(),
        },
    ))
}

struct BceBackward<T> {
    clamped: Vec<T>,
    targets: Vec<T>,
}

impl<T: Real> BackwardOp<T> for BceBackward<T> {
    fn name(&self) -> &'static str {
        "bce_loss"
    }

    fn backward(&self, _inputs: &[Tensor<T>], g: &[T]) -> Vec<Option<Vec<T>>> {
        let n = T::from_usize(self.targets.len()).unwrap();
        let gs = self
            .clamped
            .iter()
            .zip(&self.targets)
            .map(|(&s, &t)| g[0] * (-(t / s) + (T::one() - t) / (T::one() - s)) / n)
            .collect();
        vec![Some(gs)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        let s = Tensor::<f64>::from_vec(&[2], vec![0.5, 0.5]).unwrap();
        let l = bce_loss(&s, &[0.0, 1.0]).unwrap().item();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);

        let s = Tensor::<f64>::from_vec(&[1], vec![1.0 - 1e-7]).unwrap();
        assert!(bce_loss(&s, &[1.0]).unwrap().item() < 1e-6);
    }

    #[test]
    fn rejects_non_binary_targets() {
        let s = Tensor::<f64>::from_vec(&[1], vec![0.3]).unwrap();
        assert!(matches!(bce_loss(&s, &[0.5]), Err(Error::Contract(_))));
        assert!(matches!(bce_loss(&s, &[0.0, 1.0]), Err(Error::Dimension { .. })));
    }
}
