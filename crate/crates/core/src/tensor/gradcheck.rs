//! Central finite-difference checks of every differentiable operation.
//!
//! Each check draws seeded random inputs, projects the op output onto a
//! random direction `r` so the scalar objective is `sum(r * op(inputs))`,
//! and compares the analytic vector-Jacobian product against
//! `(f(x + h e_i) - f(x - h e_i)) / 2h` for every input element.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::ops::{self, Conv1dSpec, Mode, Pool, RunningStats};
use super::{no_grad, Tensor};
use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Denominator floor of the relative error, so exact zeros compare sanely.
const REL_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckedOp {
    Conv1d,
    Conv1dGroupedStrided,
    BatchNormTrain,
    BatchNormEval,
    Relu,
    Sigmoid,
    MaxPool,
    GlobalMaxPool,
    GlobalAvgPool,
    Dense,
    SpatialDropout,
    ResidualAdd,
    ScaleChannels,
    Reshape,
    Sum,
    Mean,
    BceLoss,
}

impl CheckedOp {
    pub const ALL: [CheckedOp; 17] = [
        CheckedOp::Conv1d,
        CheckedOp::Conv1dGroupedStrided,
        CheckedOp::BatchNormTrain,
        CheckedOp::BatchNormEval,
        CheckedOp::Relu,
        CheckedOp::Sigmoid,
        CheckedOp::MaxPool,
        CheckedOp::GlobalMaxPool,
        CheckedOp::GlobalAvgPool,
        CheckedOp::Dense,
        CheckedOp::SpatialDropout,
        CheckedOp::ResidualAdd,
        CheckedOp::ScaleChannels,
        CheckedOp::Reshape,
        CheckedOp::Sum,
        CheckedOp::Mean,
        CheckedOp::BceLoss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckedOp::Conv1d => "conv1d",
            CheckedOp::Conv1dGroupedStrided => "conv1d(groups=2,stride=2,pad=1)",
            CheckedOp::BatchNormTrain => "batch_norm1d(train)",
            CheckedOp::BatchNormEval => "batch_norm1d(eval)",
            CheckedOp::Relu => "relu",
            CheckedOp::Sigmoid => "sigmoid",
            CheckedOp::MaxPool => "max_pool1d(k=2,s=2)",
            CheckedOp::GlobalMaxPool => "global_max_pool1d",
            CheckedOp::GlobalAvgPool => "global_avg_pool1d",
            CheckedOp::Dense => "dense",
            CheckedOp::SpatialDropout => "spatial_dropout(0.3)",
            CheckedOp::ResidualAdd => "residual_add",
            CheckedOp::ScaleChannels => "scale_channels",
            CheckedOp::Reshape => "reshape",
            CheckedOp::Sum => "sum",
            CheckedOp::Mean => "mean",
            CheckedOp::BceLoss => "bce_loss",
        }
    }

    /// Default `N x C x L` sizes used by [`grad_check`].
    pub fn default_dims(self) -> [usize; 3] {
        match self {
            CheckedOp::Conv1d => [1, 2, 10],
            CheckedOp::Conv1dGroupedStrided => [2, 4, 9],
            CheckedOp::Dense => [2, 3, 1],
            CheckedOp::BceLoss => [6, 1, 1],
            _ => [2, 3, 5],
        }
    }
}

impl fmt::Display for CheckedOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckEntry {
    pub op: &'static str,
    pub dims: [usize; 3],
    pub seed: u64,
    pub max_rel_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub tolerance: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GradCheckEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    /// Worst error per op, in `CheckedOp::ALL` order.
    pub fn worst_by_op(&self) -> Vec<(&'static str, f64, usize)> {
        let mut rows: Vec<(&'static str, f64, usize)> = Vec::new();
        for e in &self.entries {
            match rows.iter_mut().find(|r| r.0 == e.op) {
                Some(r) => {
                    r.1 = r.1.max(e.max_rel_error);
                    r.2 += 1;
                }
                None => rows.push((e.op, e.max_rel_error, 1)),
            }
        }
        rows
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "op\tcases\tmax_rel_error\tstatus")?;
        for (op, worst, n) in self.worst_by_op() {
            let status = if worst < self.tolerance { "PASS" } else { "FAIL" };
            writeln!(f, "{op}\t{n}\t{worst:.3e}\t{status}")?;
        }
        Ok(())
    }
}

struct Case {
    /// Shapes and values of the differentiable inputs.
    inputs: Vec<(Vec<usize>, Vec<f64>)>,
    eval: Box<dyn Fn(&[Tensor<f64>]) -> Result<Tensor<f64>>>,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn build_case(op: CheckedOp, [n, c, l]: [usize; 3], rng: &mut ChaCha8Rng) -> Case {
    let x = |rng: &mut ChaCha8Rng| (vec![n, c, l], uniform(rng, n * c * l, -1.0, 1.0));
    match op {
        CheckedOp::Conv1d | CheckedOp::Conv1dGroupedStrided => {
            let (spec, cout, k) = if op == CheckedOp::Conv1d {
                (Conv1dSpec::new(1, 0, 1), 3, 3)
            } else {
                (Conv1dSpec::new(2, 1, 2), 4, 3)
            };
            let wshape = vec![cout, c / spec.groups, k];
            let wn = wshape.iter().product();
            Case {
                inputs: vec![
                    x(rng),
                    (wshape, uniform(rng, wn, -1.0, 1.0)),
                    (vec![cout], uniform(rng, cout, -1.0, 1.0)),
                ],
                eval: Box::new(move |t| ops::conv1d(&t[0], &t[1], Some(&t[2]), spec)),
            }
        }
        CheckedOp::BatchNormTrain | CheckedOp::BatchNormEval => {
            let mode = if op == CheckedOp::BatchNormTrain {
                Mode::Train
            } else {
                Mode::Eval
            };
            let stats = RunningStats {
                mean: uniform(rng, c, -0.5, 0.5),
                var: uniform(rng, c, 0.5, 1.5),
            };
            Case {
                inputs: vec![
                    x(rng),
                    (vec![c], uniform(rng, c, 0.5, 1.5)),
                    (vec![c], uniform(rng, c, -0.5, 0.5)),
                ],
                eval: Box::new(move |t| {
                    let mut s = stats.clone();
                    ops::batch_norm1d(&t[0], &t[1], &t[2], &mut s, mode, Default::default())
                }),
            }
        }
        CheckedOp::Relu => Case {
            inputs: vec![x(rng)],
            eval: Box::new(|t| Ok(ops::relu(&t[0]))),
        },
        CheckedOp::Sigmoid => Case {
            inputs: vec![(vec![n, c, l], uniform(rng, n * c * l, -4.0, 4.0))],
            eval: Box::new(|t| Ok(ops::sigmoid(&t[0]))),
        },
        CheckedOp::MaxPool => Case {
            inputs: vec![x(rng)],
            eval: Box::new(|t| ops::pool1d(&t[0], Pool::Max { kernel: 2, stride: 2 })),
        },
        CheckedOp::GlobalMaxPool => Case {
            inputs: vec![x(rng)],
            eval: Box::new(|t| ops::pool1d(&t[0], Pool::GlobalMax)),
        },
        CheckedOp::GlobalAvgPool => Case {
            inputs: vec![x(rng)],
            eval: Box::new(|t| ops::pool1d(&t[0], Pool::GlobalAvg)),
        },
        CheckedOp::Dense => {
            let (rows, din, dout) = (n, c, 4);
            Case {
                inputs: vec![
                    (vec![rows, din], uniform(rng, rows * din, -1.0, 1.0)),
                    (vec![dout, din], uniform(rng, dout * din, -1.0, 1.0)),
                    (vec![dout], uniform(rng, dout, -1.0, 1.0)),
                ],
                eval: Box::new(|t| ops::dense(&t[0], &t[1], &t[2])),
            }
        }
        CheckedOp::SpatialDropout => {
            let mask_seed = rng.gen::<u64>();
            Case {
                inputs: vec![x(rng)],
                eval: Box::new(move |t| {
                    let mut r = ChaCha8Rng::seed_from_u64(mask_seed);
                    ops::spatial_dropout(&t[0], 0.3, Mode::Train, &mut r)
                }),
            }
        }
        CheckedOp::ResidualAdd => Case {
            inputs: vec![x(rng), x(rng)],
            eval: Box::new(|t| ops::residual_add(&t[0], &t[1])),
        },
        CheckedOp::ScaleChannels => Case {
            inputs: vec![x(rng), (vec![n, c], uniform(rng, n * c, 0.0, 1.0))],
            eval: Box::new(|t| ops::scale_channels(&t[0], &t[1])),
        },
        CheckedOp::Reshape => Case {
            inputs: vec![x(rng)],
            eval: Box::new(move |t| ops::reshape(&t[0], &[n, c * l])),
        },
        CheckedOp::Sum => Case {
            inputs: vec![x(rng)],
            eval: Box::new(|t| Ok(ops::sum(&t[0]))),
        },
        CheckedOp::Mean => Case {
            inputs: vec![x(rng)],
            eval: Box::new(|t| Ok(ops::mean(&t[0]))),
        },
        CheckedOp::BceLoss => {
            let targets: Vec<f64> = (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { 0.0 }).collect();
            Case {
                inputs: vec![(vec![n], uniform(rng, n, 0.05, 0.95))],
                eval: Box::new(move |t| ops::bce_loss(&t[0], &targets)),
            }
        }
    }
}

fn objective(case: &Case, values: &[Vec<f64>], direction: &[f64]) -> Result<f64> {
    no_grad(|| {
        let tensors = case
            .inputs
            .iter()
            .zip(values)
            .map(|((shape, _), v)| Tensor::from_vec(shape, v.clone()))
            .collect::<Result<Vec<_>>>()?;
        let out = (case.eval)(&tensors)?;
        let d = out.data();
        Ok(d.iter().zip(direction).map(|(a, b)| a * b).sum())
    })
}

/// Check one op at the given sizes; deterministic in `seed`.
pub fn grad_check(op: CheckedOp, dims: [usize; 3], seed: u64, step: f64, tolerance: f64) -> Result<GradCheckEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let case = build_case(op, dims, &mut rng);

    let params = case
        .inputs
        .iter()
        .map(|(shape, v)| Tensor::parameter(shape, v.clone()))
        .collect::<Result<Vec<_>>>()?;
    let out = (case.eval)(&params)?;
    let direction = uniform(&mut rng, out.numel(), -1.0, 1.0);
    out.backward_with(direction.clone())?;

    let mut values: Vec<Vec<f64>> = case.inputs.iter().map(|(_, v)| v.clone()).collect();
    let mut worst: f64 = 0.0;
    for (i, p) in params.iter().enumerate() {
        let analytic = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
        for j in 0..values[i].len() {
            let orig = values[i][j];
            values[i][j] = orig + step;
            let up = objective(&case, &values, &direction)?;
            values[i][j] = orig - step;
            let down = objective(&case, &values, &direction)?;
            values[i][j] = orig;
            let numeric = (up - down) / (2.0 * step);
            let a = analytic[j];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            worst = worst.max(rel);
        }
    }
    Ok(GradCheckEntry {
        op: op.name(),
        dims,
        seed,
        max_rel_error: worst,
        passed: worst < tolerance,
    })
}

/// Every op in [`CheckedOp::ALL`] over `cases_per_op` seeds.
pub fn run_suite(cases_per_op: usize, base_seed: u64, step: f64, tolerance: f64) -> Result<GradCheckReport> {
    let mut entries = Vec::new();
    for op in CheckedOp::ALL {
        for k in 0..cases_per_op as u64 {
            entries.push(grad_check(op, op.default_dims(), base_seed + k, step, tolerance)?);
        }
    }
    Ok(GradCheckReport {
        step,
        tolerance,
        entries,
    })
}
