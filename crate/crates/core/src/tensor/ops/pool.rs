use crate::error::{Error, Result};
use crate::tensor::{BackwardOp, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pool {
    /// Sliding max, no padding; output length follows the conv formula.
    Max { kernel: usize, stride: usize },
    GlobalMax,
    GlobalAvg,
}

pub fn pool1d<T: Real>(input: &Tensor<T>, kind: Pool) -> Result<Tensor<T>> {
    if input.rank() != 3 {
        return Err(Error::dim(
            "pool1d",
            format!("input must be N x C x L, got {:?}", input.shape()),
        ));
    }
    let (n, c, len) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let x = input.data();
    let (lout, out, argmax) = match kind {
        Pool::Max { kernel, stride } => {
            if kernel == 0 || stride == 0 {
                return Err(Error::config("pool1d kernel and stride must be positive"));
            }
            if kernel > len {
                return Err(Error::dim(
                    "pool1d",
                    format!("kernel {kernel} exceeds length {len}"),
                ));
            }
            let lout = (len - kernel) / stride + 1;
            let mut out = Vec::with_capacity(n * c * lout);
            let mut arg = Vec::with_capacity(n * c * lout);
            for row in x.chunks(len) {
                let base = arg.len() / lout * len;
                for o in 0..lout {
                    let start = o * stride;
                    let (mut best, mut at) = (row[start], start);
                    for (i, &v) in row[start..start + kernel].iter().enumerate().skip(1) {
                        if v > best {
                            best = v;
                            at = start + i;
                        }
                    }
                    out.push(best);
                    arg.push(base + at);
                }
            }
            (lout, out, arg)
        }
        Pool::GlobalMax => {
            let mut out = Vec::with_capacity(n * c);
            let mut arg = Vec::with_capacity(n * c);
            for (r, row) in x.chunks(len).enumerate() {
                let (mut best, mut at) = (row[0], 0);
                for (i, &v) in row.iter().enumerate().skip(1) {
                    if v > best {
                        best = v;
                        at = i;
                    }
                }
                out.push(best);
                arg.push(r * len + at);
            }
            (1, out, arg)
        }
        Pool::GlobalAvg => {
            let lf = T::from_usize(len).unwrap();
            let out = x
                .chunks(len)
                .map(|row| row.iter().copied().sum::<T>() / lf)
                .collect();
            (1, out, Vec::new())
        }
    };
    drop(x);
    Ok(Tensor::from_op(
        vec![n, c, lout],
        out,
        vec![input.clone()],
        PoolBackward { kind, argmax, len },
    ))
}

struct PoolBackward {
    kind: Pool,
    argmax: Vec<usize>,
    len: usize,
}

impl<T: Real> BackwardOp<T> for PoolBackward {
    fn name(&self) -> &'static str {
        match self.kind {
            Pool::Max { .. } => "max_pool1d",
            Pool::GlobalMax => "global_max_pool1d",
            Pool::GlobalAvg => "global_avg_pool1d",
        }
    }

    fn backward(&self, inputs: &[Tensor<T>], g: &[T]) -> Vec<Option<Vec<T>>> {
        let mut gx = vec![T::zero(); inputs[0].numel()];
        match self.kind {
            Pool::Max { .. } | Pool::GlobalMax => {
                for (&at, &gv) in self.argmax.iter().zip(g) {
                    gx[at] = gx[at] + gv;
                }
            }
            Pool::GlobalAvg => {
                let lf = T::from_usize(self.len).unwrap();
                for (row, &gv) in gx.chunks_mut(self.len).zip(g) {
                    row.fill(gv / lf);
                }
            }
        }
        vec![Some(gx)]
    }
}
