use crate::error::{Error, Result};
use crate::tensor::{BackwardOp, Real, Tensor};

/// Elementwise sum of two equally shaped tensors. This is the residual
/// join `H(x) = F(x) + x`: the upstream gradient flows to both operands
/// unchanged.
pub fn residual_add<T: Real>(main: &Tensor<T>, skip: &Tensor<T>) -> Result<Tensor<T>> {
    if main.shape() != skip.shape() {
        return Err(Error::dim(
            "residual_add",
            format!(
                "main {:?} and skip {:?} differ; project the skip path first",
                main.shape(),
                skip.shape()
            ),
        ));
    }
    let out: Vec<T> = {
        let a = main.data();
        let b = skip.data();
        a.iter().zip(b.iter()).map(|(&x, &y)| x + y).collect()
    };
    Ok(Tensor::from_op(
        main.shape().to_vec(),
        out,
        vec![main.clone(), skip.clone()],
        AddBackward,
    ))
}

struct AddBackward;

impl<T: Real> BackwardOp<T> for AddBackward {
    fn name(&self) -> &'static str {
        "residual_add"
    }

    fn backward(&self, _inputs: &[Tensor<T>], g: &[T]) -> Vec<Option<Vec<T>>> {
        vec![Some(g.to_vec()), Some(g.to_vec())]
    }
}

/// `y[n, c, l] = x[n, c, l] * gate[n, c]`.
pub fn scale_channels<T: Real>(input: &Tensor<T>, gate: &Tensor<T>) -> Result<Tensor<T>> {
    if input.rank() != 3 || gate.rank() != 2 || input.shape()[..2] != gate.shape()[..] {
        return Err(Error::dim(
            "scale_channels",
            format!(
                "input {:?} needs an N x C gate, got {:?}",
                input.shape(),
                gate.shape()
            ),
        ));
    }
    let len = input.shape()[2];
    let out: Vec<T> = {
        let x = input.data();
        let gv = gate.data();
        x.chunks(len)
            .zip(gv.iter())
            .flat_map(|(row, &s)| row.iter().map(move |&v| v * s))
            .collect()
    };
    Ok(Tensor::from_op(
        input.shape().to_vec(),
        out,
        vec![input.clone(), gate.clone()],
        ScaleBackward { len },
    ))
}

struct ScaleBackward {
    len: usize,
}

impl<T: Real> BackwardOp<T> for ScaleBackward {
    fn name(&self) -> &'static str {
        "scale_channels"
    }

    fn backward(&self, inputs: &[Tensor<T>], g: &[T]) -> Vec<Option<Vec<T>>> {
        let x = inputs[0].data();
        let gate = inputs[1].data();
        let mut gx = Vec::with_capacity(g.len());
        let mut gg = Vec::with_capacity(gate.len());
        for ((grow, xrow), &s) in g.chunks(self.len).zip(x.chunks(self.len)).zip(gate.iter()) {
            gx.extend(grow.iter().map(|&v| v * s));
            gg.push(grow.iter().zip(xrow).map(|(&a, &b)| a * b).sum());
        }
        vec![Some(gx), Some(gg)]
    }
}

/// Same values, new shape.
pub fn reshape<T: Real>(input: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>> {
    let n: usize = shape.iter().product();
    if n != input.numel() {
        return Err(Error::dim(
            "reshape",
            format!("cannot view {:?} as {shape:?}", input.shape()),
        ));
    }
    Ok(Tensor::from_op(
        shape.to_vec(),
        input.to_vec(),
        vec![input.clone()],
        ReshapeBackward,
    ))
}

struct ReshapeBackward;

impl<T: Real> BackwardOp<T> for ReshapeBackward {
    fn name(&self) -> &'static str {
        "reshape"
    }

    fn backward(&self, _inputs: &[Tensor<T>], g: &[T]) -> Vec<Option<Vec<T>>> {
        vec![Some(g.to_vec())]
    }
}

#[derive(Clone, Copy)]
enum Reduce {
    Sum,
    Mean,
}

fn reduce<T: Real>(input: &Tensor<T>, how: Reduce) -> Tensor<T> {
    let s: T = input.data().iter().copied().sum();
    let v = match how {
        Reduce::Sum => s,
        Reduce::Mean => s / T::from_usize(input.numel()).unwrap(),
    };
    Tensor::from_op(vec![1], vec![v], vec![input.clone()], ReduceBackward(how))
}

pub fn sum<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    reduce(input, Reduce::Sum)
}

pub fn mean<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    reduce(input, Reduce::Mean)
}

struct ReduceBackward(Reduce);

impl<T: Real> BackwardOp<T> for ReduceBackward {
    fn name(&self) -> &'static str {
        match self.0 {
            Reduce::Sum => "sum",
            Reduce::Mean => "mean",
        }
    }

    fn backward(&self, inputs: &[Tensor<T>], g: &[T]) -> Vec<Option<Vec<T>>> {
        let n = inputs[0].numel();
        let v = match self.0 {
            Reduce::Sum => g[0],
            Reduce::Mean => g[0] / T::from_usize(n).unwrap(),
        };
        vec![Some(vec![v; n])]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_add_identities() {
        let a = Tensor::<f64>::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let z = Tensor::zeros(&[1, 2, 2]);
        assert_eq!(residual_add(&z, &a).unwrap().to_vec(), a.to_vec());
        assert_eq!(residual_add(&a, &z).unwrap().to_vec(), a.to_vec());
        let b = Tensor::zeros(&[1, 4, 1]);
        assert!(residual_add(&a, &b).is_err());
    }

    #[test]
    fn sum_backward_is_ones() {
        let x = Tensor::<f64>::parameter(&[3], vec![0.3, -1.0, 2.0]).unwrap();
        sum(&x).backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn scale_channels_broadcasts_over_time() {
        let x = Tensor::<f64>::from_vec(&[1, 2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let g = Tensor::from_vec(&[1, 2], vec![0.5, 2.0]).unwrap();
        assert_eq!(
            scale_channels(&x, &g).unwrap().to_vec(),
            vec![0.5, 1.0, 1.5, 8.0, 10.0, 12.0]
        );
    }
}
