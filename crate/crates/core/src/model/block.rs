use crate::error::{Error, Result};
use crate::tensor::ops::{
    pool1d, relu, reshape, residual_add, scale_channels, sigmoid, spatial_dropout, Conv1dSpec, Mode, Pool,
};
use crate::tensor::{Real, Tensor};

use super::config::BlockPlan;
use super::layers::{ConvLayer, Ctx, DenseLayer, PreActConv, Visitor};

/// Squeeze (global average) and excitation (two dense layers, sigmoid gate).
pub struct SeBlock<T: Real> {
    pub fc1: DenseLayer<T>,
    pub fc2: DenseLayer<T>,
}

impl<T: Real> SeBlock<T> {
    pub fn new(channels: usize, reduction: usize) -> Result<Self> {
        if reduction == 0 || channels % reduction != 0 {
            return Err(Error::config(format!(
                "SE reduction {reduction} does not divide {channels} channels"
            )));
        }
        Ok(SeBlock {
            fc1: DenseLayer::new(channels, channels / reduction)?,
            fc2: DenseLayer::new(channels / reduction, channels)?,
        })
    }

    /// Per-channel gates in (0, 1), shape `N x C`.
    pub fn gates(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c) = (x.shape()[0], x.shape()[1]);
        let squeezed = reshape(&pool1d(x, Pool::GlobalAvg)?, &[n, c])?;
        let hidden = relu(&self.fc1.forward(&squeezed)?);
        Ok(sigmoid(&self.fc2.forward(&hidden)?))
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        scale_channels(x, &self.gates(x)?)
    }

    pub fn visit<'a>(&'a self, v: &mut Visitor<'a, T>) {
        v.scope("fc1", |v| self.fc1.visit(v));
        v.scope("fc2", |v| self.fc2.visit(v));
    }
}

/// Pre-activation residual block whose middle convolution is grouped into
/// `groups` parallel branches.
pub struct PsaBlock<T: Real> {
    pub conv_a: PreActConv<T>,
    pub conv_g: PreActConv<T>,
    pub conv_c: PreActConv<T>,
    pub se: Option<SeBlock<T>>,
    /// 1x1 strided convolution on the skip path when shapes change.
    pub projection: Option<ConvLayer<T>>,
    pub dropout: f64,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl<T: Real> PsaBlock<T> {
    pub fn new(plan: &BlockPlan, se_reduction: Option<usize>, dropout: f64) -> Result<Self> {
        if plan.bottleneck % plan.groups != 0 {
            return Err(Error::config(format!(
                "stage {}: {} groups do not divide bottleneck {}",
                plan.stage + 1,
                plan.groups,
                plan.bottleneck
            )));
        }
        Ok(PsaBlock {
            conv_a: PreActConv::new(plan.in_channels, plan.bottleneck, 3, Conv1dSpec::new(plan.stride, 1, 1))?,
            conv_g: PreActConv::new(plan.bottleneck, plan.bottleneck, 3, Conv1dSpec::new(1, 1, plan.groups))?,
            conv_c: PreActConv::new(plan.bottleneck, plan.out_channels, 3, Conv1dSpec::new(1, 1, 1))?,
            se: se_reduction.map(|r| SeBlock::new(plan.out_channels, r)).transpose()?,
            projection: if plan.projection {
                Some(ConvLayer::new(
                    plan.in_channels,
                    plan.out_channels,
                    1,
                    Conv1dSpec::new(plan.stride, 0, 1),
                )?)
            } else {
                None
            },
            dropout,
            in_channels: plan.in_channels,
            out_channels: plan.out_channels,
        })
    }

    pub fn groups(&self) -> usize {
        self.conv_g.conv.spec.groups
    }

    /// The residual branch F(x): grouped transform, spatial dropout, SE.
    pub fn branch_forward(&self, x: &Tensor<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        if x.rank() != 3 || x.shape()[1] != self.in_channels {
            return Err(Error::dim(
                "psa_block",
                format!("expected N x {} x L input, got {:?}", self.in_channels, x.shape()),
            ));
        }
        let h = self.conv_a.forward(x, ctx)?;
        let h = self.conv_g.forward(&h, ctx)?;
        let mut h = self.conv_c.forward(&h, ctx)?;
        if ctx.mode == Mode::Train && self.dropout > 0.0 {
            let rng = ctx
                .rng
                .as_deref_mut()
                .ok_or_else(|| Error::contract("train-mode dropout needs a random generator"))?;
            h = spatial_dropout(&h, self.dropout, Mode::Train, rng)?;
        }
        match &self.se {
            Some(se) => se.forward(&h),
            None => Ok(h),
        }
    }

    pub fn skip_forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match &self.projection {
            Some(p) => p.forward(x),
            None => Ok(x.clone()),
        }
    }

    /// H(x) = skip(x) + F(x).
    pub fn forward(&self, x: &Tensor<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        let f = self.branch_forward(x, ctx)?;
        residual_add(&f, &self.skip_forward(x)?)
    }

    pub fn visit<'a>(&'a self, v: &mut Visitor<'a, T>) {
        v.scope("conv_a", |v| self.conv_a.visit(v));
        v.scope("conv_g", |v| self.conv_g.visit(v));
        v.scope("conv_c", |v| self.conv_c.visit(v));
        if let Some(se) = &self.se {
            v.scope("se", |v| se.visit(v));
        }
        if let Some(p) = &self.projection {
            v.scope("proj", |v| p.visit(v));
        }
    }
}
