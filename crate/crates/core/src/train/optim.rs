use crate::error::{Error, Result};
use crate::model::Param;
use crate::tensor::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled: subtracts `lr * weight_decay * theta` from decaying weights.
    pub weight_decay: f64,
    /// Rescale gradients whose global L2 norm exceeds this.
    pub max_grad_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 1e-3,
            max_grad_norm: Some(5.0),
        }
    }
}

/// First and second moments per parameter, plus the step counter.
#[derive(Debug, Clone)]
pub struct Adam<T: Real> {
    pub config: AdamConfig,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub step: u64,
    pub grad_norm: f64,
    pub clipped: bool,
}

impl<T: Real> Adam<T> {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Param<T>>, config: AdamConfig) -> Self {
        let sizes: Vec<usize> = params.into_iter().map(|p| p.tensor.numel()).collect();
        Adam {
            config,
            m: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            step: 0,
        }
    }

    /// One bias-corrected Adam update. Missing gradients count as zero. A
    /// non-finite gradient aborts the step before anything is modified.
    pub fn step(&mut self, params: &[Param<T>], lr: f64) -> Result<StepInfo> {
        if params.len() != self.m.len() {
            return Err(Error::contract(format!(
                "optimizer tracks {} tensors, got {}",
                self.m.len(),
                params.len()
            )));
        }
        let grads: Vec<Option<Vec<T>>> = params.iter().map(|p| p.tensor.grad()).collect();
        let mut sq = 0.0f64;
        for (p, g) in params.iter().zip(&grads) {
            if let Some(g) = g {
                for &x in g {
                    if !x.is_finite() {
                        return Err(Error::Numeric(format!(
                            "non-finite gradient in `{}`; step {} skipped",
                            p.name,
                            self.step + 1
                        )));
                    }
                    let x = x.to_f64_lossy();
                    sq += x * x;
                }
            }
        }
        let norm = sq.sqrt();
        let scale = match self.config.max_grad_norm {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };
        self.step += 1;
        let t = self.step as i32;
        let c = self.config;
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bc1 = T::lit(1.0 - c.beta1.powi(t));
        let bc2 = T::lit(1.0 - c.beta2.powi(t));
        let (lr_t, eps, scale_t) = (T::lit(lr), T::lit(c.epsilon), T::lit(scale));
        let one = T::one();
        for (i, (p, g)) in params.iter().zip(&grads).enumerate() {
            let decay = if p.kind.decays() { T::lit(lr * c.weight_decay) } else { T::zero() };
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            p.tensor.update_data(|theta| {
                for j in 0..theta.len() {
                    let gj = g.as_ref().map_or(T::zero(), |g| g[j] * scale_t);
                    m[j] = b1 * m[j] + (one - b1) * gj;
                    v[j] = b2 * v[j] + (one - b2) * gj * gj;
                    let mhat = m[j] / bc1;
                    let vhat = v[j] / bc2;
                    theta[j] = theta[j] - lr_t * mhat / (vhat.sqrt() + eps) - decay * theta[j];
                }
            });
        }
        Ok(StepInfo {
            step: self.step,
            grad_norm: norm,
            clipped: scale < 1.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamKind;
    use crate::tensor::Tensor;

    fn scalar_param(v: f64, kind: ParamKind) -> Param<f64> {
        Param {
            name: "w".into(),
            tensor: Tensor::parameter(&[1], vec![v]).unwrap(),
            kind,
        }
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let p = vec![scalar_param(0.7, ParamKind::DenseWeight { fan_in: 1 })];
        let mut opt = Adam::new(&p, AdamConfig { weight_decay: 0.0, ..AdamConfig::default() });
        for _ in 0..3 {
            p[0].tensor.zero_grad();
            opt.step(&p, 1e-2).unwrap();
        }
        assert_eq!(p[0].tensor.item(), 0.7);
    }

    #[test]
    fn decoupled_decay_shrinks_geometrically_and_skips_bn() {
        let w = scalar_param(2.0, ParamKind::ConvWeight { fan_in: 1 });
        let g = scalar_param(2.0, ParamKind::BnGamma);
        let p = vec![w, g];
        let mut opt = Adam::new(&p, AdamConfig::default());
        let lr = 0.1;
        for _ in 0..5 {
            opt.step(&p, lr).unwrap();
        }
        let expect = 2.0 * (1.0 - lr * 1e-3f64).powi(5);
        assert!((p[0].tensor.item() - expect).abs() < 1e-15);
        assert_eq!(p[1].tensor.item(), 2.0);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let p = vec![scalar_param(1.0, ParamKind::Bias)];
        let y = crate::tensor::ops::sum(&crate::tensor::ops::scale_channels(
            &crate::tensor::ops::reshape(&p[0].tensor, &[1, 1, 1]).unwrap(),
            &Tensor::from_vec(&[1, 1], vec![f64::INFINITY]).unwrap(),
        ).unwrap());
        y.backward().unwrap();
        let mut opt = Adam::new(&p, AdamConfig::default());
        assert!(matches!(opt.step(&p, 0.1), Err(Error::Numeric(_))));
        assert_eq!(opt.step, 0);
        assert_eq!(p[0].tensor.item(), 1.0);
    }
}
