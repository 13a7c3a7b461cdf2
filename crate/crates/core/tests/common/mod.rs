//! Reference implementations for the integration tests. Everything here is
//! written with plain loops over `f64` so it shares no code with the
//! library beyond reading parameter values.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use psa_core::dsp::{AudioClip, Label};
use psa_core::model::{BlockPlan, ParamKind, Visitor};
use psa_core::tensor::{Real, Tensor};

pub const BN_EPS: f64 = 1e-5;

/// `n x c x l`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Arr {
    pub n: usize,
    pub c: usize,
    pub l: usize,
    pub v: Vec<f64>,
}

impl Arr {
    pub fn zeros(n: usize, c: usize, l: usize) -> Self {
        Arr { n, c, l, v: vec![0.0; n * c * l] }
    }

    pub fn from_tensor<T: Real>(t: &Tensor<T>) -> Self {
        let s = t.shape();
        Arr {
            n: s[0],
            c: s[1],
            l: s[2],
            v: t.to_vec().into_iter().map(|x| x.to_f64_lossy()).collect(),
        }
    }

    pub fn at(&self, n: usize, c: usize, i: usize) -> f64 {
        self.v[(n * self.c + c) * self.l + i]
    }

    pub fn at_mut(&mut self, n: usize, c: usize, i: usize) -> &mut f64 {
        &mut self.v[(n * self.c + c) * self.l + i]
    }

    /// Channels `lo..hi`.
    pub fn channels(&self, lo: usize, hi: usize) -> Arr {
        let mut out = Arr::zeros(self.n, hi - lo, self.l);
        for n in 0..self.n {
            for c in lo..hi {
                for i in 0..self.l {
                    *out.at_mut(n, c - lo, i) = self.at(n, c, i);
                }
            }
        }
        out
    }

    pub fn add(&self, o: &Arr) -> Arr {
        assert_eq!((self.n, self.c, self.l), (o.n, o.c, o.l));
        Arr {
            v: self.v.iter().zip(&o.v).map(|(a, b)| a + b).collect(),
            ..self.clone()
        }
    }

    pub fn relu(&self) -> Arr {
        Arr {
            v: self.v.iter().map(|&x| x.max(0.0)).collect(),
            ..self.clone()
        }
    }
}

pub fn values<T: Real>(t: &Tensor<T>) -> Vec<f64> {
    t.to_vec().into_iter().map(|x| x.to_f64_lossy()).collect()
}

/// Dense (ungrouped) convolution. `w` is `cout x cin x k` flattened.
pub fn conv(x: &Arr, w: &[f64], cout: usize, k: usize, bias: Option<&[f64]>, stride: usize, pad: usize) -> Arr {
    let lout = (x.l + 2 * pad - k) / stride + 1;
    let mut y = Arr::zeros(x.n, cout, lout);
    for n in 0..x.n {
        for o in 0..cout {
            for t in 0..lout {
                let mut acc = bias.map_or(0.0, |b| b[o]);
                for c in 0..x.c {
                    for j in 0..k {
                        let pos = (t * stride + j) as isize - pad as isize;
                        if pos >= 0 && (pos as usize) < x.l {
                            acc += w[(o * x.c + c) * k + j] * x.at(n, c, pos as usize);
                        }
                    }
                }
                *y.at_mut(n, o, t) = acc;
            }
        }
    }
    y
}

/// Rows `lo..hi` of a `cout x cin x k` weight.
pub fn out_rows(w: &[f64], cin: usize, k: usize, lo: usize, hi: usize) -> Vec<f64> {
    w[lo * cin * k..hi * cin * k].to_vec()
}

/// Input columns `lo..hi` of a `cout x cin x k` weight.
pub fn in_cols(w: &[f64], cout: usize, cin: usize, k: usize, lo: usize, hi: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(cout * (hi - lo) * k);
    for o in 0..cout {
        for c in lo..hi {
            out.extend_from_slice(&w[(o * cin + c) * k..(o * cin + c + 1) * k]);
        }
    }
    out
}

/// Eval-mode batch norm with explicit statistics.
pub fn bn_eval(x: &Arr, gamma: &[f64], beta: &[f64], mean: &[f64], var: &[f64]) -> Arr {
    let mut y = x.clone();
    for n in 0..x.n {
        for c in 0..x.c {
            let s = 1.0 / (var[c] + BN_EPS).sqrt();
            for i in 0..x.l {
                *y.at_mut(n, c, i) = (x.at(n, c, i) - mean[c]) * s * gamma[c] + beta[c];
            }
        }
    }
    y
}

pub fn dense(x: &[f64], w: &[f64], b: &[f64], dout: usize) -> Vec<f64> {
    let din = x.len();
    (0..dout)
        .map(|o| b[o] + (0..din).map(|i| w[o * din + i] * x[i]).sum::<f64>())
        .collect()
}

/// Squeeze-excitation gating with weights `(w1, b1, w2, b2)`.
pub fn se(x: &Arr, w1: &[f64], b1: &[f64], w2: &[f64], b2: &[f64]) -> Arr {
    let hidden = b1.len();
    let mut y = x.clone();
    for n in 0..x.n {
        let pooled: Vec<f64> = (0..x.c)
            .map(|c| (0..x.l).map(|i| x.at(n, c, i)).sum::<f64>() / x.l as f64)
            .collect();
        let h: Vec<f64> = dense(&pooled, w1, b1, hidden).into_iter().map(|v| v.max(0.0)).collect();
        let g: Vec<f64> = dense(&h, w2, b2, x.c).into_iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect();
        for c in 0..x.c {
            for i in 0..x.l {
                *y.at_mut(n, c, i) *= g[c];
            }
        }
    }
    y
}

/// Fill every parameter and running statistic reachable from `v` with
/// seeded values that keep activations of order one. BN is deliberately
/// far from identity so its per-channel slicing is exercised.
pub fn randomize<T: Real>(v: &Visitor<'_, T>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for p in &v.params {
        let (lo, hi) = match p.kind {
            ParamKind::ConvWeight { fan_in } | ParamKind::DenseWeight { fan_in } => {
                let a = (3.0 / fan_in as f64).sqrt();
                (-a, a)
            }
            ParamKind::Bias | ParamKind::BnBeta => (-0.2, 0.2),
            ParamKind::BnGamma => (0.5, 1.5),
        };
        p.tensor
            .update_data(|d| d.iter_mut().for_each(|x| *x = T::lit(rng.gen_range(lo..hi))));
    }
    for (_, stats) in &v.buffers {
        let mut s = stats.lock().unwrap();
        s.mean.iter_mut().for_each(|x| *x = T::lit(rng.gen_range(-0.3..0.3)));
        s.var.iter_mut().for_each(|x| *x = T::lit(rng.gen_range(0.5..2.0)));
    }
}

/// Named parameter values and statistics from a visitor, as `f64`.
pub struct Weights {
    pub params: std::collections::HashMap<String, Vec<f64>>,
    pub stats: std::collections::HashMap<String, (Vec<f64>, Vec<f64>)>,
}

impl Weights {
    pub fn read<T: Real>(v: &Visitor<'_, T>) -> Self {
        Weights {
            params: v.params.iter().map(|p| (p.name.clone(), values(&p.tensor))).collect(),
            stats: v
                .buffers
                .iter()
                .map(|(n, s)| {
                    let s = s.lock().unwrap();
                    let f = |x: &Vec<T>| x.iter().map(|v| v.to_f64_lossy()).collect::<Vec<f64>>();
                    (n.clone(), (f(&s.mean), f(&s.var)))
                })
                .collect(),
        }
    }

    pub fn p(&self, name: &str) -> &[f64] {
        self.params.get(name).unwrap_or_else(|| panic!("no parameter {name}"))
    }

    /// Eval-mode BN of layer `prefix` restricted to channels `lo..hi`.
    pub fn bn_slice(&self, prefix: &str, x: &Arr, lo: usize, hi: usize) -> Arr {
        let (mean, var) = &self.stats[&format!("{prefix}.running")];
        bn_eval(
            x,
            &self.p(&format!("{prefix}.gamma"))[lo..hi],
            &self.p(&format!("{prefix}.beta"))[lo..hi],
            &mean[lo..hi],
            &var[lo..hi],
        )
    }
}

/// Aggregated block written as an explicit sum over `groups` branches, each
/// with its own slice of every layer. Eval mode, no dropout.
pub fn branch_sum_block(w: &Weights, plan: &BlockPlan, x: &Arr, with_se: bool) -> Arr {
    let d = plan.bottleneck / plan.groups;
    let (cin, b, cout) = (plan.in_channels, plan.bottleneck, plan.out_channels);
    let a = w.bn_slice("conv_a.bn", x, 0, cin).relu();
    let wa = w.p("conv_a.conv.weight");
    let ba = w.p("conv_a.conv.bias");
    let wg = w.p("conv_g.conv.weight");
    let bg = w.p("conv_g.conv.bias");
    let wc = w.p("conv_c.conv.weight");
    let mut total: Option<Arr> = None;
    for i in 0..plan.groups {
        let (lo, hi) = (i * d, (i + 1) * d);
        let u = conv(&a, &out_rows(wa, cin, 3, lo, hi), d, 3, Some(&ba[lo..hi]), plan.stride, 1);
        let u = w.bn_slice("conv_g.bn", &u, lo, hi).relu();
        // Grouped weights are `b x d x 3`; branch i owns rows lo..hi.
        let v = conv(&u, &out_rows(wg, d, 3, lo, hi), d, 3, Some(&bg[lo..hi]), 1, 1);
        let v = w.bn_slice("conv_c.bn", &v, lo, hi).relu();
        let t = conv(&v, &in_cols(wc, cout, b, 3, lo, hi), cout, 3, None, 1, 1);
        total = Some(match total {
            None => t,
            Some(acc) => acc.add(&t),
        });
    }
    let mut f = total.expect("at least one branch");
    let bc = w.p("conv_c.conv.bias");
    for n in 0..f.n {
        for c in 0..f.c {
            for t in 0..f.l {
                *f.at_mut(n, c, t) += bc[c];
            }
        }
    }
    if with_se {
        f = se(&f, w.p("se.fc1.weight"), w.p("se.fc1.bias"), w.p("se.fc2.weight"), w.p("se.fc2.bias"));
    }
    let skip = if plan.projection {
        conv(x, w.p("proj.weight"), cout, 1, Some(w.p("proj.bias")), plan.stride, 0)
    } else {
        x.clone()
    };
    f.add(&skip)
}

pub fn random_input<T: Real>(shape: &[usize], seed: u64) -> Tensor<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n: usize = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect()).unwrap()
}

/// Bonafide and spoof score lists for metric oracles. `ties` quantizes
/// scores to a coarse grid so many values coincide.
pub fn random_scores(rng: &mut ChaCha8Rng, ties: bool) -> (Vec<f64>, Vec<f64>) {
    let nb = rng.gen_range(1..=100);
    let ns = rng.gen_range(1..=100);
    let shift: f64 = rng.gen_range(-0.5..2.0);
    let q = |x: f64| if ties { (x * 8.0).round() / 8.0 } else { x };
    let b = (0..nb).map(|_| q(rng.gen_range(0.0..1.0) + shift)).collect();
    let s = (0..ns).map(|_| q(rng.gen_range(0.0..1.0))).collect();
    (b, s)
}

/// Brute-force rates at a threshold: (bonafide rejected, spoof accepted).
pub fn rates_at(b: &[f64], s: &[f64], t: f64) -> (f64, f64) {
    let frr = b.iter().filter(|&&x| x < t).count() as f64 / b.len() as f64;
    let far = s.iter().filter(|&&x| x >= t).count() as f64 / s.len() as f64;
    (frr, far)
}

pub fn candidate_thresholds(b: &[f64], s: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = b.iter().chain(s).copied().collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t.push(f64::INFINITY);
    t
}

/// EER by exhaustive threshold enumeration: find the first candidate where
/// the miss rate reaches the false-alarm rate and intersect the two
/// piecewise-linear curves on the segment that ends there.
pub fn eer_oracle(b: &[f64], s: &[f64]) -> f64 {
    let ts = candidate_thresholds(b, s);
    let pts: Vec<(f64, f64)> = ts.iter().map(|&t| rates_at(b, s, t)).collect();
    for k in 0..pts.len() {
        let (frr, far) = pts[k];
        if frr >= far {
            if k == 0 || frr == far {
                return frr;
            }
            let (f0, a0) = pts[k - 1];
            // frr(a) = f0 + a (frr - f0), far(a) = a0 + a (far - a0)
            let a = (a0 - f0) / ((frr - f0) - (far - a0));
            return f0 + a * (frr - f0);
        }
    }
    unreachable!("rejecting everything gives frr = 1 > far = 0")
}

/// AUC by comparing every bonafide/spoof pair.
pub fn auc_oracle(b: &[f64], s: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &x in b {
        for &y in s {
            wins += if x > y {
                1.0
            } else if x == y {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (b.len() * s.len()) as f64
}

pub fn labeled(samples: Vec<f64>, id: &str, label: Label) -> AudioClip {
    let attack = (label == Label::Spoof).then(|| "LA01".to_owned());
    AudioClip::new(samples, 16000).with_id(id).with_label(label, attack)
}
