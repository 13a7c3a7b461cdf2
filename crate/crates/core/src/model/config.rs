use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::ops::conv_out_len;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Grouped transform with `cardinality` branches.
    Aggregated,
    /// Single-branch residual network; requires cardinality 1.
    PlainResnet,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aggregated" => Ok(Variant::Aggregated),
            "plain_resnet" | "resnet" => Ok(Variant::PlainResnet),
            other => Err(Error::config(format!("unknown variant `{other}`"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Aggregated => "aggregated",
            Variant::PlainResnet => "plain_resnet",
        })
    }
}

pub const DEPTHS: [usize; 4] = [18, 34, 50, 101];
pub const MAX_POOL: (usize, usize) = (2, 2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub cardinality: usize,
    /// Per-branch channels in the first stage; doubles with every stage.
    pub bottleneck_width: usize,
    pub stage_widths: Vec<usize>,
    pub stage_strides: Vec<usize>,
    pub stem_filters: [usize; 3],
    pub stem_kernels: [usize; 3],
    pub stem_strides: [usize; 3],
    pub depth: usize,
    pub use_se: bool,
    pub se_reduction: usize,
    pub spatial_dropout: f64,
    pub variant: Variant,
    pub head_hidden: usize,
    pub input_length: usize,
}

impl Default for ModelConfig {
    /// The full-size reference network.
    fn default() -> Self {
        ModelConfig {
            cardinality: 4,
            bottleneck_width: 64,
            stage_widths: vec![32, 64, 128, 256, 512],
            stage_strides: vec![1, 2, 2, 1, 2],
            stem_filters: [64, 128, 256],
            stem_kernels: [196, 144, 100],
            stem_strides: [16, 16, 4],
            depth: 18,
            use_se: true,
            se_reduction: 16,
            spatial_dropout: 0.2,
            variant: Variant::Aggregated,
            head_hidden: 1000,
            input_length: 64_000,
        }
    }
}

/// Shapes of one residual block in the plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    pub stage: usize,
    pub index: usize,
    pub in_channels: usize,
    pub bottleneck: usize,
    pub out_channels: usize,
    pub groups: usize,
    pub stride: usize,
    pub in_len: usize,
    pub out_len: usize,
    pub projection: bool,
}

impl ModelConfig {
    /// Small network used by the desk-scale end-to-end run.
    pub fn tiny() -> Self {
        ModelConfig {
            cardinality: 4,
            bottleneck_width: 8,
            stage_widths: vec![8, 16, 32, 64, 128],
            stem_filters: [8, 16, 16],
            stem_kernels: [32, 16, 8],
            stem_strides: [8, 8, 4],
            se_reduction: 4,
            spatial_dropout: 0.1,
            head_hidden: 32,
            ..ModelConfig::default()
        }
    }

    pub fn groups(&self) -> usize {
        match self.variant {
            Variant::Aggregated => self.cardinality,
            Variant::PlainResnet => 1,
        }
    }

    pub fn branch_count(&self) -> usize {
        self.groups()
    }

    /// Residual blocks per stage. The first stage always has one block; the
    /// rest follow the usual residual-network repeat counts.
    pub fn blocks_per_stage(&self) -> Result<Vec<usize>> {
        let tail: [usize; 4] = match self.depth {
            18 => [2, 2, 2, 2],
            34 | 50 => [3, 4, 6, 3],
            101 => [3, 4, 23, 3],
            d => return Err(Error::config(format!("unsupported depth {d} (18, 34, 50, 101)"))),
        };
        let mut v = vec![1];
        v.extend_from_slice(&tail);
        Ok(v)
    }

    pub fn stem_padding(&self, i: usize) -> usize {
        (self.stem_kernels[i] - 1) / 2
    }

    /// Temporal lengths after each stem conv and after the max pool.
    pub fn stem_lengths(&self) -> Result<[usize; 4]> {
        let mut len = self.input_length;
        let mut out = [0; 4];
        for i in 0..3 {
            len = conv_out_len(len, self.stem_kernels[i], self.stem_strides[i], self.stem_padding(i))
                .filter(|&l| l > 0)
                .ok_or_else(|| {
                    Error::config(format!(
                        "stem conv {}: kernel {} does not fit length {len}",
                        i + 1,
                        self.stem_kernels[i]
                    ))
                })?;
            out[i] = len;
        }
        out[3] = conv_out_len(len, MAX_POOL.0, MAX_POOL.1, 0)
            .ok_or_else(|| Error::config(format!("stem max pool needs length >= 2, got {len}")))?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cardinality == 0 || self.bottleneck_width == 0 {
            return Err(Error::config("cardinality and bottleneck width must be >= 1"));
        }
        if self.variant == Variant::PlainResnet && self.cardinality != 1 {
            return Err(Error::config(format!(
                "plain_resnet variant needs cardinality 1, got {}",
                self.cardinality
            )));
        }
        if self.stage_widths.len() != 5 || self.stage_strides.len() != 5 {
            return Err(Error::config(format!(
                "need 5 stage widths and strides, got {} and {}",
                self.stage_widths.len(),
                self.stage_strides.len()
            )));
        }
        if self.stem_filters.contains(&0) || self.stem_kernels.contains(&0) || self.stem_strides.contains(&0) {
            return Err(Error::config("stem filters, kernels and strides must be positive"));
        }
        for (s, (&w, &st)) in self.stage_widths.iter().zip(&self.stage_strides).enumerate() {
            if w == 0 || !(st == 1 || st == 2) {
                return Err(Error::config(format!("stage {}: width {w}, stride {st} (stride must be 1 or 2)", s + 1)));
            }
            if s > 0 {
                let prev = self.stage_widths[s - 1];
                if w <= prev {
                    return Err(Error::config(format!(
                        "stage {}: width {w} must grow past {prev}",
                        s + 1
                    )));
                }
                if st == 2 && w != 2 * prev {
                    return Err(Error::config(format!(
                        "stage {}: halves length so width must double {prev} -> {}, got {w}",
                        s + 1,
                        2 * prev
                    )));
                }
            }
            if self.use_se && (self.se_reduction == 0 || w % self.se_reduction != 0) {
                return Err(Error::config(format!(
                    "stage {}: SE reduction {} does not divide width {w}",
                    s + 1,
                    self.se_reduction
                )));
            }
        }
        if !(0.0..1.0).contains(&self.spatial_dropout) {
            return Err(Error::config(format!(
                "spatial dropout {} outside [0, 1)",
                self.spatial_dropout
            )));
        }
        if self.head_hidden == 0 {
            return Err(Error::config("head_hidden must be positive"));
        }
        self.blocks_per_stage()?;
        self.block_plan()?;
        Ok(())
    }

    /// Every residual block in order, with channel and length bookkeeping.
    pub fn block_plan(&self) -> Result<Vec<BlockPlan>> {
        let counts = self.blocks_per_stage()?;
        let mut len = self.stem_lengths()?[3];
        let mut cin = self.stem_filters[2];
        let mut plan = Vec::new();
        for (s, &n) in counts.iter().enumerate().take(self.stage_widths.len()) {
            let w = self.stage_widths[s];
            let bottleneck = (self.cardinality * self.bottleneck_width) << s;
            for b in 0..n {
                let stride = if b == 0 { self.stage_strides[s] } else { 1 };
                let out_len = conv_out_len(len, 3, stride, 1)
                    .filter(|&l| l > 0)
                    .ok_or_else(|| Error::config(format!("stage {}: temporal length {len} too short", s + 1)))?;
                plan.push(BlockPlan {
                    stage: s,
                    index: b,
                    in_channels: cin,
                    bottleneck,
                    out_channels: w,
                    groups: self.groups(),
                    stride,
                    in_len: len,
                    out_len,
                    projection: cin != w || stride != 1,
                });
                cin = w;
                len = out_len;
            }
        }
        Ok(plan)
    }
}
