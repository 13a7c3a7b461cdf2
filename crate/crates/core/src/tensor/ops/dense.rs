use crate::error::{Error, Result};
use crate::tensor::{BackwardOp, Real, Tensor};

/// Affine map `y_i = W x_i + b` over rows of an `N x Din` input.
pub fn dense<T: Real>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    if input.rank() != 2 || weight.rank() != 2 {
        return Err(Error::dim(
            "dense",
            format!(
                "expected N x Din input and Dout x Din weight, got {:?} and {:?}",
                input.shape(),
                weight.shape()
            ),
        ));
    }
    let (n, din) = (input.shape()[0], input.shape()[1]);
    let (dout, wdin) = (weight.shape()[0], weight.shape()[1]);
    if din != wdin {
        return Err(Error::dim(
            "dense",
            format!("input has {din} features, weight expects {wdin}"),
        ));
    }
    if bias.shape() != [dout] {
        return Err(Error::dim(
            "dense",
            format!("bias must be [{dout}], got {:?}", bias.shape()),
        ));
    }
    let x = input.data();
    let w = weight.data();
    let b = bias.data();
    let mut out = Vec::with_capacity(n * dout);
    for row in x.chunks(din) {
        for (o, w_row) in w.chunks(din).enumerate() {
            let s: T = w_row.iter().zip(row).map(|(&a, &v)| a * v).sum();
            out.push(s + b[o]);
        }
    }
    drop((x, w, b));
    Ok(Tensor::from_op(
        vec![n, dout],
        out,
        vec![input.clone(), weight.clone(), bias.clone()],
        DenseBackward { n, din, dout },
    ))
}

struct DenseBackward {
    n: usize,
    din: usize,
    dout: usize,
}

impl<T: Real> BackwardOp<T> for DenseBackward {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn backward(&self, inputs: &[Tensor<T>], g: &[T]) -> Vec<Option<Vec<T>>> {
        let (n, din, dout) = (self.n, self.din, self.dout);
        let x = inputs[0].data();
        let w = inputs[1].data();
        let mut gx = vec![T::zero(); n * din];
        let mut gw = vec![T::zero(); dout * din];
        let mut gb = vec![T::zero(); dout];
        for i in 0..n {
            let xr = &x[i * din..][..din];
            let gxr = &mut gx[i * din..][..din];
            for o in 0..dout {
                let gv = g[i * dout + o];
                gb[o] = gb[o] + gv;
                let wr = &w[o * din..][..din];
                let gwr = &mut gw[o * din..][..din];
                for d in 0..din {
                    gxr[d] = gxr[d] + gv * wr[d];
                    gwr[d] = gwr[d] + gv * xr[d];
                }
            }
        }
        vec![Some(gx), Some(gw), Some(gb)]
    }
}
