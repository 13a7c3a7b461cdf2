use std::sync::Mutex;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::tensor::ops::{
    batch_norm1d, conv1d, dense, relu, BatchNormSpec, Conv1dSpec, Mode, RunningStats,
};
use crate::tensor::{Real, Tensor};

/// Per-forward state: train/eval mode and the dropout generator.
pub struct Ctx<'a> {
    pub mode: Mode,
    pub rng: Option<&'a mut dyn RngCore>,
}

impl<'a> Ctx<'a> {
    pub fn eval() -> Self {
        Ctx { mode: Mode::Eval, rng: None }
    }

    pub fn train(rng: &'a mut dyn RngCore) -> Self {
        Ctx {
            mode: Mode::Train,
            rng: Some(rng),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    ConvWeight { fan_in: usize },
    DenseWeight { fan_in: usize },
    Bias,
    BnGamma,
    BnBeta,
}

impl ParamKind {
    pub fn decays(self) -> bool {
        matches!(self, ParamKind::ConvWeight { .. } | ParamKind::DenseWeight { .. })
    }
}

#[derive(Clone)]
pub struct Param<T: Real> {
    pub name: String,
    pub tensor: Tensor<T>,
    pub kind: ParamKind,
}

/// Collects named parameters and batch-norm buffers while walking a model.
pub struct Visitor<'a, T: Real> {
    prefix: Vec<String>,
    pub params: Vec<Param<T>>,
    pub buffers: Vec<(String, &'a Mutex<RunningStats<T>>)>,
}

impl<'a, T: Real> Visitor<'a, T> {
    pub fn new() -> Self {
        Visitor {
            prefix: Vec::new(),
            params: Vec::new(),
            buffers: Vec::new(),
        }
    }

    pub fn scope(&mut self, name: impl Into<String>, f: impl FnOnce(&mut Self)) {
        self.prefix.push(name.into());
        f(self);
        self.prefix.pop();
    }

    fn path(&self, leaf: &str) -> String {
        let mut p = self.prefix.join(".");
        if !p.is_empty() {
            p.push('.');
        }
        p.push_str(leaf);
        p
    }

    pub fn param(&mut self, leaf: &str, tensor: &Tensor<T>, kind: ParamKind) {
        let name = self.path(leaf);
        self.params.push(Param {
            name,
            tensor: tensor.clone(),
            kind,
        });
    }

    pub fn buffer(&mut self, leaf: &str, stats: &'a Mutex<RunningStats<T>>) {
        let name = self.path(leaf);
        self.buffers.push((name, stats));
    }
}

impl<T: Real> Default for Visitor<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

pub struct ConvLayer<T: Real> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
    pub spec: Conv1dSpec,
}

impl<T: Real> ConvLayer<T> {
    /// Zero weights; initialization is the trainer's job.
    pub fn new(cin: usize, cout: usize, kernel: usize, spec: Conv1dSpec) -> Result<Self> {
        if spec.groups == 0 || cin % spec.groups != 0 || cout % spec.groups != 0 {
            return Err(Error::config(format!(
                "groups {} must divide channels {cin} -> {cout}",
                spec.groups
            )));
        }
        Ok(ConvLayer {
            weight: Tensor::parameter(&[cout, cin / spec.groups, kernel], vec![T::zero(); cout * cin / spec.groups * kernel])?,
            bias: Tensor::parameter(&[cout], vec![T::zero(); cout])?,
            spec,
        })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv1d(x, &self.weight, Some(&self.bias), self.spec)
    }

    pub fn fan_in(&self) -> usize {
        self.weight.shape()[1] * self.weight.shape()[2]
    }

    pub fn visit<'a>(&'a self, v: &mut Visitor<'a, T>) {
        v.param("weight", &self.weight, ParamKind::ConvWeight { fan_in: self.fan_in() });
        v.param("bias", &self.bias, ParamKind::Bias);
    }
}

pub struct BnLayer<T: Real> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running: Mutex<RunningStats<T>>,
    pub spec: BatchNormSpec,
}

impl<T: Real> BnLayer<T> {
    pub fn new(channels: usize) -> Self {
        BnLayer {
            gamma: Tensor::full(&[channels], T::one()).detach_parameter(),
            beta: Tensor::zeros(&[channels]).detach_parameter(),
            running: Mutex::new(RunningStats::new(channels)),
            spec: BatchNormSpec::default(),
        }
    }

    pub fn forward(&self, x: &Tensor<T>, ctx: &Ctx) -> Result<Tensor<T>> {
        let mut stats = self.running.lock().unwrap();
        batch_norm1d(x, &self.gamma, &self.beta, &mut stats, ctx.mode, self.spec)
    }

    pub fn visit<'a>(&'a self, v: &mut Visitor<'a, T>) {
        v.param("gamma", &self.gamma, ParamKind::BnGamma);
        v.param("beta", &self.beta, ParamKind::BnBeta);
        v.buffer("running", &self.running);
    }
}

/// Batch norm, ReLU, then convolution.
pub struct PreActConv<T: Real> {
    pub bn: BnLayer<T>,
    pub conv: ConvLayer<T>,
}

impl<T: Real> PreActConv<T> {
    pub fn new(cin: usize, cout: usize, kernel: usize, spec: Conv1dSpec) -> Result<Self> {
        Ok(PreActConv {
            bn: BnLayer::new(cin),
            conv: ConvLayer::new(cin, cout, kernel, spec)?,
        })
    }

    pub fn forward(&self, x: &Tensor<T>, ctx: &Ctx) -> Result<Tensor<T>> {
        self.conv.forward(&relu(&self.bn.forward(x, ctx)?))
    }

    pub fn visit<'a>(&'a self, v: &mut Visitor<'a, T>) {
        v.scope("bn", |v| self.bn.visit(v));
        v.scope("conv", |v| self.conv.visit(v));
    }
}

pub struct DenseLayer<T: Real> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> DenseLayer<T> {
    pub fn new(din: usize, dout: usize) -> Result<Self> {
        Ok(DenseLayer {
            weight: Tensor::parameter(&[dout, din], vec![T::zero(); dout * din])?,
            bias: Tensor::parameter(&[dout], vec![T::zero(); dout])?,
        })
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        dense(x, &self.weight, &self.bias)
    }

    pub fn visit<'a>(&'a self, v: &mut Visitor<'a, T>) {
        v.param(
            "weight",
            &self.weight,
            ParamKind::DenseWeight {
                fan_in: self.weight.shape()[1],
            },
        );
        v.param("bias", &self.bias, ParamKind::Bias);
    }
}
