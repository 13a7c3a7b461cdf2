use rand::Rng;

use super::norm::Mode;
use crate::error::{Error, Result};
use crate::tensor::{BackwardOp, Real, Tensor};

/// Channel-wise (spatial) dropout with inverted scaling.
///
/// In train mode one Bernoulli draw per `(n, c)` decides whether the whole
/// channel is zeroed; survivors are scaled by `1 / (1 - rate)`. Eval mode
/// and `rate == 0` return the input unchanged.
pub fn spatial_dropout<T: Real, R: Rng + ?Sized>(
    input: &Tensor<T>,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<Tensor<T>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!(
            "spatial dropout rate {rate} outside [0, 1)"
        )));
    }
    if input.rank() != 3 {
        return Err(Error::dim(
            "spatial_dropout",
            format!("input must be N x C x L, got {:?}", input.shape()),
        ));
    }
    if mode == Mode::Eval || rate == 0.0 {
        return Ok(input.clone());
    }
    let (n, c, len) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    let keep = T::lit(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..n * c)
        .map(|_| if rng.gen::<f64>() < rate { T::zero() } else { keep })
        .collect();
    let x = input.data();
    let out: Vec<T> = x
        .chunks(len)
        .zip(&mask)
        .flat_map(|(row, &m)| row.iter().map(move |&v| v * m))
        .collect();
    drop(x);
    Ok(Tensor::from_op(
        vec![n, c, len],
        out,
        vec![input.clone()],
        DropoutBackward { mask, len },
    ))
}

struct DropoutBackward<T> {
    mask: Vec<T>,
    len: usize,
}

impl<T: Real> BackwardOp<T> for DropoutBackward<T> {
    fn name(&self) -> &'static str {
        "spatial_dropout"
    }

    fn backward(&self, _inputs: &[Tensor<T>], g: &[T]) -> Vec<Option<Vec<T>>> {
        let gx = g
            .chunks(self.len)
            .zip(&self.mask)
            .flat_map(|(row, &m)| row.iter().map(move |&v| v * m))
            .collect();
        vec![Some(gx)]
    }
}
