use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::model::{Network, ParamKind, Visitor};
use crate::tensor::Real;

/// He-normal weights (variance 2 / fan_in) for every convolution and dense
/// layer, zero biases, unit batch-norm scale and zero shift. Running
/// statistics are reset.
pub fn kaiming_init<T: Real>(net: &Network<T>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = Visitor::new();
    net.visit(&mut v);
    for p in &v.params {
        match p.kind {
            ParamKind::ConvWeight { fan_in } | ParamKind::DenseWeight { fan_in } => {
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
                p.tensor
                    .update_data(|d| d.iter_mut().for_each(|w| *w = T::lit(normal.sample(&mut rng))));
            }
            ParamKind::Bias | ParamKind::BnBeta => p.tensor.update_data(|d| d.fill(T::zero())),
            ParamKind::BnGamma => p.tensor.update_data(|d| d.fill(T::one())),
        }
    }
    for (_, stats) in &v.buffers {
        let mut s = stats.lock().unwrap();
        s.mean.fill(T::zero());
        s.var.fill(T::one());
    }
}
