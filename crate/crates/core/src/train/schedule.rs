use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    /// `base * sqrt(warmup / step)` after warmup.
    InverseSqrt,
    /// Cosine annealing from `base` to 0, restarting every `period` steps.
    CosineRestarts { period: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    pub base_lr: f64,
    pub warmup_steps: u64,
    pub decay: Decay,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            base_lr: 1e-4,
            warmup_steps: 1000,
            decay: Decay::InverseSqrt,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return Err(Error::config(format!("base learning rate {} must be >= 0", self.base_lr)));
        }
        if let Decay::CosineRestarts { period: 0 } = self.decay {
            return Err(Error::config("cosine restart period must be positive"));
        }
        Ok(())
    }

    /// Linear warmup from 0 to `base_lr` over `warmup_steps`, then decay.
    /// With no warmup the decay starts from step 1.
    pub fn lr_at(&self, step: u64) -> f64 {
        self.lr_at_continuous(step as f64)
    }

    /// The schedule as a function of a real-valued step.
    pub fn lr_at_continuous(&self, t: f64) -> f64 {
        let w = self.warmup_steps as f64;
        if w > 0.0 && t <= w {
            return self.base_lr * t.max(0.0) / w;
        }
        let w = w.max(1.0);
        match self.decay {
            Decay::InverseSqrt => self.base_lr * (w / t.max(1.0)).sqrt(),
            Decay::CosineRestarts { period } => {
                let p = period as f64;
                let phase = (t - w).max(0.0) % p;
                self.base_lr * 0.5 * (1.0 + (PI * phase / p).cos())
            }
        }
    }
}
