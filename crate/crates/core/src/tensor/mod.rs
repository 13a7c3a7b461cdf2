//! Dense row-major tensors with a recorded operation graph for reverse-mode
//! differentiation.
//!
//! A [`Tensor`] is a cheap handle (`Arc`) to shape, values and an optional
//! gradient slot. Operations in [`ops`] produce new tensors and, when any
//! input requires a gradient, attach an [`OpNode`] that saves whatever the
//! backward pass needs. [`Tensor::backward`] walks the recorded graph once
//! in reverse topological order and then releases it.

mod autograd;
pub mod gradcheck;
pub mod ops;

use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard};

use num_traits::{Float, FromPrimitive};

use crate::error::{Error, Result};

pub use autograd::{is_grad_enabled, no_grad};
pub(crate) use autograd::{BackwardOp, OpNode};

/// Floating-point element type. `f64` is used by oracles and gradient
/// checks, `f32` by training.
pub trait Real:
    Float + FromPrimitive + std::iter::Sum + fmt::Debug + fmt::Display + Default + Send + Sync + 'static
{
    const DTYPE: &'static str;

    fn lit(x: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    fn write_le(self, out: &mut Vec<u8>);

    fn read_le(bytes: &[u8]) -> Self;

    const BYTES: usize;
}

impl Real for f32 {
    const DTYPE: &'static str = "f32";
    const BYTES: usize = 4;

    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4 bytes"))
    }
}

impl Real for f64 {
    const DTYPE: &'static str = "f64";
    const BYTES: usize = 8;

    #[inline]
    fn lit(x: f64) -> Self {
        x
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8 bytes"))
    }
}

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

pub(crate) struct TensorInner<T: Real> {
    id: u64,
    shape: Vec<usize>,
    data: RwLock<Vec<T>>,
    grad: Mutex<Option<Vec<T>>>,
    requires_grad: bool,
    retain_grad: AtomicBool,
    node: Mutex<Option<OpNode<T>>>,
    /// Set once backward has released this tensor's node.
    consumed: AtomicBool,
}

pub struct Tensor<T: Real> {
    inner: Arc<TensorInner<T>>,
}

impl<T: Real> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<T: Real> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = self
            .inner
            .node
            .lock()
            .unwrap()
            .as_ref()
            .map(|n| n.op.name());
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .field("op", &op)
            .finish()
    }
}

impl<T: Real> Tensor<T> {
    fn build(shape: Vec<usize>, data: Vec<T>, requires_grad: bool, node: Option<OpNode<T>>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor {
            inner: Arc::new(TensorInner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RwLock::new(data),
                grad: Mutex::new(None),
                requires_grad,
                retain_grad: AtomicBool::new(false),
                node: Mutex::new(node),
                consumed: AtomicBool::new(false),
            }),
        }
    }

    /// Leaf tensor without gradient tracking.
    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        check_shape(shape, data.len())?;
        Ok(Self::build(shape.to_vec(), data, false, None))
    }

    /// Trainable leaf: receives gradients on backward.
    pub fn parameter(shape: &[usize], data: Vec<T>) -> Result<Self> {
        check_shape(shape, data.len())?;
        Ok(Self::build(shape.to_vec(), data, true, None))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::build(shape.to_vec(), vec![T::zero(); n], false, None)
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        let n = shape.iter().product();
        Self::build(shape.to_vec(), vec![value; n], false, None)
    }

    pub fn scalar(value: T) -> Self {
        Self::build(vec![1], vec![value], false, None)
    }

    /// Output of an operation. The node is attached only when gradient
    /// recording is enabled and some input requires a gradient.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<T>,
        inputs: Vec<Tensor<T>>,
        op: impl BackwardOp<T> + 'static,
    ) -> Self {
        let track = is_grad_enabled() && inputs.iter().any(|t| t.requires_grad());
        if track {
            let node = OpNode {
                op: Box::new(op),
                inputs,
            };
            Self::build(shape, data, true, Some(node))
        } else {
            Self::build(shape, data, false, None)
        }
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn rank(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.inner.node.lock().unwrap().is_none() && !self.inner.consumed.load(Ordering::Acquire)
    }

    /// Read access to the values.
    pub fn data(&self) -> RwLockReadGuard<'_, Vec<T>> {
        self.inner.data.read().unwrap()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.data().clone()
    }

    /// First element; intended for scalar tensors.
    pub fn item(&self) -> T {
        self.data()[0]
    }

    /// In-place update of a leaf's values (optimizer steps, initialization).
    pub fn update_data(&self, f: impl FnOnce(&mut [T])) {
        let mut guard = self.inner.data.write().unwrap();
        f(&mut guard);
    }

    pub fn set_data(&self, values: &[T]) -> Result<()> {
        let mut guard = self.inner.data.write().unwrap();
        if guard.len() != values.len() {
            return Err(Error::dim(
                "set_data",
                format!("expected {} values, got {}", guard.len(), values.len()),
            ));
        }
        guard.copy_from_slice(values);
        Ok(())
    }

    pub fn grad(&self) -> Option<Vec<T>> {
        self.inner.grad.lock().unwrap().clone()
    }

    pub fn zero_grad(&self) {
        *self.inner.grad.lock().unwrap() = None;
    }

    /// Keep the gradient of a non-leaf tensor after backward.
    pub fn retain_grad(&self) {
        self.inner.retain_grad.store(true, Ordering::Release);
    }

    /// Same values, no history.
    pub fn detach(&self) -> Self {
        Self::build(self.inner.shape.clone(), self.to_vec(), false, None)
    }

    /// Fresh trainable leaf holding a copy of the values.
    pub fn detach_parameter(&self) -> Self {
        Self::build(self.inner.shape.clone(), self.to_vec(), true, None)
    }

    pub(crate) fn accumulate_grad(&self, g: &[T]) {
        let mut slot = self.inner.grad.lock().unwrap();
        match slot.as_mut() {
            Some(acc) => {
                for (a, &b) in acc.iter_mut().zip(g) {
                    *a = *a + b;
                }
            }
            None => *slot = Some(g.to_vec()),
        }
    }

    pub(crate) fn set_grad(&self, g: Vec<T>) {
        *self.inner.grad.lock().unwrap() = Some(g);
    }

    pub(crate) fn take_node(&self) -> Option<OpNode<T>> {
        self.inner.node.lock().unwrap().take()
    }

    pub(crate) fn with_node<R>(&self, f: impl FnOnce(Option<&OpNode<T>>) -> R) -> R {
        let guard = self.inner.node.lock().unwrap();
        f(guard.as_ref())
    }

    pub(crate) fn mark_consumed(&self) {
        self.inner.consumed.store(true, Ordering::Release);
    }

    pub(crate) fn is_consumed(&self) -> bool {
        self.inner.consumed.load(Ordering::Acquire)
    }

    pub(crate) fn retains_grad(&self) -> bool {
        self.inner.retain_grad.load(Ordering::Acquire)
    }

    /// Reverse-mode pass from a scalar loss.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape()
            )));
        }
        self.backward_with(vec![T::one()])
    }

    /// Reverse-mode pass seeded with an explicit upstream gradient of the
    /// same shape as `self` (a vector-Jacobian product).
    pub fn backward_with(&self, seed: Vec<T>) -> Result<()> {
        autograd::run_backward(self, seed)
    }

    pub fn all_finite(&self) -> bool {
        self.data().iter().all(|v| v.is_finite())
    }
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    if shape.iter().any(|&d| d == 0) {
        return Err(Error::dim("tensor", format!("zero-sized dimension in {shape:?}")));
    }
    let n: usize = shape.iter().product();
    if n != len {
        return Err(Error::dim(
            "tensor",
            format!("shape {shape:?} holds {n} values, got {len}"),
        ));
    }
    Ok(())
}
