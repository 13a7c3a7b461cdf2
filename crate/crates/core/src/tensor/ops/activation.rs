use crate::tensor::{BackwardOp, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[inline]
pub fn sigmoid_scalar<T: Real>(x: T) -> T {
    // Split on sign so exp never overflows.
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn activation<T: Real>(input: &Tensor<T>, kind: Activation) -> Tensor<T> {
    let x = input.data();
    let out: Vec<T> = match kind {
        Activation::Relu => x.iter().map(|&v| v.max(T::zero())).collect(),
        Activation::Sigmoid => x.iter().map(|&v| sigmoid_scalar(v)).collect(),
    };
    drop(x);
    let saved = if kind == Activation::Sigmoid {
        out.clone()
    } else {
        Vec::new()
    };
    Tensor::from_op(
        input.shape().to_vec(),
        out,
        vec![input.clone()],
        ActivationBackward { kind, saved },
    )
}

pub fn relu<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    activation(input, Activation::Relu)
}

pub fn sigmoid<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    activation(input, Activation::Sigmoid)
}

struct ActivationBackward<T> {
    kind: Activation,
    /// Sigmoid output; empty for ReLU.
    saved: Vec<T>,
}

impl<T: Real> BackwardOp<T> for ActivationBackward<T> {
    fn name(&self) -> &'static str {
        match self.kind {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        }
    }

    fn backward(&self, inputs: &[Tensor<T>], g: &[T]) -> Vec<Option<Vec<T>>> {
        let gx = match self.kind {
            Activation::Relu => {
                let x = inputs[0].data();
                x.iter()
                    .zip(g)
                    .map(|(&v, &gv)| if v > T::zero() { gv } else { T::zero() })
                    .collect()
            }
            Activation::Sigmoid => self
                .saved
                .iter()
                .zip(g)
                .map(|(&s, &gv)| gv * s * (T::one() - s))
                .collect(),
        };
        vec![Some(gx)]
    }
}
