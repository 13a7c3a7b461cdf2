use crate::error::{Error, Result};
use crate::tensor::{BackwardOp, Real, Tensor};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-channel running mean and (biased) variance.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Real> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        RunningStats {
            mean: vec![T::zero(); channels],
            var: vec![T::one(); channels],
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BatchNormSpec {
    pub epsilon: f64,
    pub momentum: f64,
}

impl Default for BatchNormSpec {
    fn default() -> Self {
        BatchNormSpec {
            epsilon: BN_EPSILON,
            momentum: BN_MOMENTUM,
        }
    }
}

/// Batch normalization over `N x C x L`, statistics per channel.
///
/// Train mode normalizes with the batch statistics and folds them into
/// `running` with the configured momentum; eval mode uses `running`.
pub fn batch_norm1d<T: Real>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running: &mut RunningStats<T>,
    mode: Mode,
    spec: BatchNormSpec,
) -> Result<Tensor<T>> {
    if spec.epsilon <= 0.0 {
        return Err(Error::config("batch_norm1d epsilon must be positive"));
    }
    if input.rank() != 3 {
        return Err(Error::dim(
            "batch_norm1d",
            format!("input must be N x C x L, got {:?}", input.shape()),
        ));
    }
    let (n, c, len) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::dim(
            "batch_norm1d",
            format!(
                "gamma/beta must be [{c}], got {:?}/{:?}",
                gamma.shape(),
                beta.shape()
            ),
        ));
    }
    if running.mean.len() != c || running.var.len() != c {
        return Err(Error::dim(
            "batch_norm1d",
            format!("running stats sized {} for {c} channels", running.mean.len()),
        ));
    }
    let m = n * len;
    if mode == Mode::Train && m < 2 {
        return Err(Error::DegenerateBatch(m));
    }

    let x = input.data();
    let gm = gamma.data();
    let bt = beta.data();
    let eps = T::lit(spec.epsilon);
    let mut xhat = vec![T::zero(); x.len()];
    let mut out = vec![T::zero(); x.len()];
    let mut inv_std = vec![T::zero(); c];
    let mf = T::from_usize(m).unwrap();

    for ch in 0..c {
        let (mean, var) = match mode {
            Mode::Train => {
                let mut s = T::zero();
                for b in 0..n {
                    s = s + x[(b * c + ch) * len..][..len].iter().copied().sum::<T>();
                }
                let mean = s / mf;
                let mut ss = T::zero();
                for b in 0..n {
                    for &v in &x[(b * c + ch) * len..][..len] {
                        let d = v - mean;
                        ss = ss + d * d;
                    }
                }
                let var = ss / mf;
                let mom = T::lit(spec.momentum);
                running.mean[ch] = (T::one() - mom) * running.mean[ch] + mom * mean;
                running.var[ch] = (T::one() - mom) * running.var[ch] + mom * var;
                (mean, var)
            }
            Mode::Eval => (running.mean[ch], running.var[ch]),
        };
        let is = T::one() / (var + eps).sqrt();
        inv_std[ch] = is;
        for b in 0..n {
            let off = (b * c + ch) * len;
            for i in off..off + len {
                let h = (x[i] - mean) * is;
                xhat[i] = h;
                out[i] = gm[ch] * h + bt[ch];
            }
        }
    }
    drop((x, gm, bt));

    Ok(Tensor::from_op(
        vec![n, c, len],
        out,
        vec![input.clone(), gamma.clone(), beta.clone()],
        BatchNormBackward {
            xhat,
            inv_std,
            n,
            c,
            len,
            mode,
        },
    ))
}

struct BatchNormBackward<T> {
    xhat: Vec<T>,
    inv_std: Vec<T>,
    n: usize,
    c: usize,
    len: usize,
    mode: Mode,
}

impl<T: Real> BackwardOp<T> for BatchNormBackward<T> {
    fn name(&self) -> &'static str {
        "batch_norm1d"
    }

    fn backward(&self, inputs: &[Tensor<T>], g: &[T]) -> Vec<Option<Vec<T>>> {
        let (n, c, len) = (self.n, self.c, self.len);
        let gamma = inputs[1].data();
        let mf = T::from_usize(n * len).unwrap();
        let mut gx = vec![T::zero(); g.len()];
        let mut ggamma = vec![T::zero(); c];
        let mut gbeta = vec![T::zero(); c];
        for ch in 0..c {
            let mut sg = T::zero();
            let mut sgx = T::zero();
            for b in 0..n {
                let off = (b * c + ch) * len;
                for i in off..off + len {
                    sg = sg + g[i];
                    sgx = sgx + g[i] * self.xhat[i];
                }
            }
            ggamma[ch] = sgx;
            gbeta[ch] = sg;
            let scale = gamma[ch] * self.inv_std[ch];
            for b in 0..n {
                let off = (b * c + ch) * len;
                for i in off..off + len {
                    gx[i] = match self.mode {
                        Mode::Train => scale * (g[i] - sg / mf - self.xhat[i] * sgx / mf),
                        Mode::Eval => scale * g[i],
                    };
                }
            }
        }
        vec![Some(gx), Some(ggamma), Some(gbeta)]
    }
}
