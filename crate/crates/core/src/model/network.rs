use crate::dsp::clip::AudioClip;
use crate::error::{Error, Result};
use crate::tensor::ops::{pool1d, relu, reshape, sigmoid, Conv1dSpec, Pool};
use crate::tensor::{no_grad, Real, Tensor};

use super::block::PsaBlock;
use super::config::{ModelConfig, MAX_POOL};
use super::layers::{BnLayer, ConvLayer, Ctx, DenseLayer, Param, PreActConv, Visitor};

/// Scores above this are bonafide.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    Bonafide,
    Spoof,
}

/// Strict threshold: a score of exactly 0.5 is spoof.
pub fn predict(score: f64) -> Prediction {
    if score > DECISION_THRESHOLD {
        Prediction::Bonafide
    } else {
        Prediction::Spoof
    }
}

pub struct Stem<T: Real> {
    /// Applied straight to the waveform, no pre-activation.
    pub conv1: ConvLayer<T>,
    pub conv2: PreActConv<T>,
    pub conv3: PreActConv<T>,
    pub bn_out: BnLayer<T>,
}

pub struct Network<T: Real> {
    pub config: ModelConfig,
    pub stem: Stem<T>,
    pub stages: Vec<Vec<PsaBlock<T>>>,
    pub final_bn: BnLayer<T>,
    pub fc1: DenseLayer<T>,
    pub fc2: DenseLayer<T>,
}

/// Stack clips into an `N x 1 x L` batch.
pub fn batch_from_clips<T: Real>(clips: &[&AudioClip]) -> Result<Tensor<T>> {
    let len = clips
        .first()
        .ok_or_else(|| Error::contract("empty batch"))?
        .len();
    let mut data = Vec::with_capacity(clips.len() * len);
    for c in clips {
        if c.len() != len {
            return Err(Error::dim(
                "batch",
                format!("clip `{}` has {} samples, batch expects {len}", c.utt_id, c.len()),
            ));
        }
        data.extend(c.samples.iter().map(|&v| T::lit(v)));
    }
    Tensor::from_vec(&[clips.len(), 1, len], data)
}

impl<T: Real> Network<T> {
    /// Build with zero weights and unit batch-norm scales.
    pub fn build(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let [f1, f2, f3] = config.stem_filters;
        let [k1, k2, k3] = config.stem_kernels;
        let [s1, s2, s3] = config.stem_strides;
        let stem = Stem {
            conv1: ConvLayer::new(1, f1, k1, Conv1dSpec::new(s1, config.stem_padding(0), 1))?,
            conv2: PreActConv::new(f1, f2, k2, Conv1dSpec::new(s2, config.stem_padding(1), 1))?,
            conv3: PreActConv::new(f2, f3, k3, Conv1dSpec::new(s3, config.stem_padding(2), 1))?,
            bn_out: BnLayer::new(f3),
        };
        let se = config.use_se.then_some(config.se_reduction);
        let mut stages: Vec<Vec<PsaBlock<T>>> = Vec::new();
        for plan in config.block_plan()? {
            if plan.index == 0 {
                stages.push(Vec::new());
            }
            let block = PsaBlock::new(&plan, se, config.spatial_dropout)?;
            stages.last_mut().expect("stage pushed").push(block);
        }
        let last = *config.stage_widths.last().expect("validated");
        Ok(Network {
            config: config.clone(),
            stem,
            stages,
            final_bn: BnLayer::new(last),
            fc1: DenseLayer::new(last, config.head_hidden)?,
            fc2: DenseLayer::new(config.head_hidden, 1)?,
        })
    }

    pub fn blocks(&self) -> impl Iterator<Item = &PsaBlock<T>> {
        self.stages.iter().flatten()
    }

    pub fn stem_forward(&self, x: &Tensor<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        let h = self.stem.conv1.forward(x)?;
        let h = self.stem.conv2.forward(&h, ctx)?;
        let h = self.stem.conv3.forward(&h, ctx)?;
        let h = relu(&self.stem.bn_out.forward(&h, ctx)?);
        pool1d(
            &h,
            Pool::Max {
                kernel: MAX_POOL.0,
                stride: MAX_POOL.1,
            },
        )
    }

    /// Pre-sigmoid head output, shape `N x 1`.
    pub fn forward_logits(&self, x: &Tensor<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        if x.rank() != 3 || x.shape()[1] != 1 || x.shape()[2] != self.config.input_length {
            return Err(Error::dim(
                "network",
                format!(
                    "expected N x 1 x {} waveform batch, got {:?}",
                    self.config.input_length,
                    x.shape()
                ),
            ));
        }
        let mut h = self.stem_forward(x, ctx)?;
        for block in self.blocks() {
            h = block.forward(&h, ctx)?;
        }
        let h = relu(&self.final_bn.forward(&h, ctx)?);
        let n = h.shape()[0];
        let c = h.shape()[1];
        let pooled = reshape(&pool1d(&h, Pool::GlobalMax)?, &[n, c])?;
        let hidden = relu(&self.fc1.forward(&pooled)?);
        self.fc2.forward(&hidden)
    }

    /// Bonafide probability per item, shape `N x 1`.
    pub fn forward(&self, x: &Tensor<T>, ctx: &mut Ctx) -> Result<Tensor<T>> {
        Ok(sigmoid(&self.forward_logits(x, ctx)?))
    }

    /// Eval-mode scores without recording a graph. The sigmoid is taken in
    /// f64 so confident f32 logits do not round to exactly 0 or 1.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Vec<f64>> {
        no_grad(|| {
            let z = self.forward_logits(x, &mut Ctx::eval())?;
            Ok(z.to_vec()
                .into_iter()
                .map(|v| 1.0 / (1.0 + (-v.to_f64_lossy()).exp()))
                .collect())
        })
    }

    /// Score one preprocessed clip.
    pub fn score_utterance(&self, clip: &AudioClip) -> Result<(f64, Prediction)> {
        if clip.len() != self.config.input_length {
            return Err(Error::contract(format!(
                "clip `{}` has {} samples; preprocess to {} first",
                clip.utt_id,
                clip.len(),
                self.config.input_length
            )));
        }
        let s = self.infer(&batch_from_clips(&[clip])?)?[0];
        Ok((s, predict(s)))
    }

    pub fn visit<'a>(&'a self, v: &mut Visitor<'a, T>) {
        v.scope("stem", |v| {
            v.scope("conv1", |v| self.stem.conv1.visit(v));
            v.scope("conv2", |v| self.stem.conv2.visit(v));
            v.scope("conv3", |v| self.stem.conv3.visit(v));
            v.scope("bn_out", |v| self.stem.bn_out.visit(v));
        });
        for (s, stage) in self.stages.iter().enumerate() {
            for (b, block) in stage.iter().enumerate() {
                v.scope(format!("stages.{s}.{b}"), |v| block.visit(v));
            }
        }
        v.scope("final_bn", |v| self.final_bn.visit(v));
        v.scope("head.fc1", |v| self.fc1.visit(v));
        v.scope("head.fc2", |v| self.fc2.visit(v));
    }

    /// All trainable tensors with their layer paths, in a fixed order.
    pub fn parameters(&self) -> Vec<Param<T>> {
        let mut v = Visitor::new();
        self.visit(&mut v);
        v.params
    }

    pub fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|p| p.tensor.numel()).sum()
    }

    pub fn zero_grad(&self) {
        for p in self.parameters() {
            p.tensor.zero_grad();
        }
    }
}
