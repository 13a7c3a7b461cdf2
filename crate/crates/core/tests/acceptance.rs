//! End-to-end acceptance checks. Runs without the libtest harness and
//! prints one PASS/FAIL line per criterion; exits nonzero if any fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;
use psa_core::data::{
    ablation_grid, format_ablation, generate_synthetic_corpus, run_ablation, separability_certificate, RunConfig,
};
use psa_core::dsp::{
    highpass_filter, lowpass_filter, standardize_length, zscore_normalize, AudioClip, TARGET_SECONDS, ZSCORE_EPSILON,
};
use psa_core::metrics::{compute_auc, compute_eer, compute_min_tdcf, cumulative_eer, ScoreSet, TDcfParams};
use psa_core::model::{count_flops, count_params, BlockPlan, Ctx, ModelConfig, PsaBlock, Variant, Visitor};
use psa_core::tensor::gradcheck::{run_suite, DEFAULT_STEP, DEFAULT_TOLERANCE};
use psa_core::tensor::ops::{
    batch_norm1d, conv1d, pool1d, relu, reshape, residual_add, scale_channels, sigmoid, BatchNormSpec,
    Conv1dSpec, Mode, Pool,
};
use psa_core::tensor::{Real, Tensor};
use psa_core::train::{train_loop, ScheduleConfig, TrainConfig};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, budget_s: u64) -> Result<(), String> {
    if elapsed.as_secs_f64() < budget_s as f64 {
        Ok(())
    } else {
        Err(format!("took {:.1} s, budget {budget_s} s", elapsed.as_secs_f64()))
    }
}

fn gradient_correctness() -> Outcome {
    let t0 = Instant::now();
    let report = run_suite(20, 1, DEFAULT_STEP, DEFAULT_TOLERANCE).map_err(|e| e.to_string())?;
    within(t0.elapsed(), 120)?;
    let worst = report.entries.iter().map(|e| e.max_rel_error).fold(0.0, f64::max);
    let ops = report.worst_by_op().len();
    check(
        report.all_passed() && report.worst_by_op().iter().all(|r| r.2 >= 20),
        format!(
            "{} checks over {ops} ops, worst rel err {worst:.2e}, {} failures",
            report.entries.len(),
            report.failures().count()
        ),
    )
}

fn plan(cin: usize, b: usize, cout: usize, groups: usize, stride: usize, len: usize) -> BlockPlan {
    BlockPlan {
        stage: 0,
        index: 0,
        in_channels: cin,
        bottleneck: b,
        out_channels: cout,
        groups,
        stride,
        in_len: len,
        out_len: (len - 1) / stride + 1,
        projection: cin != cout || stride != 1,
    }
}

fn block<T: Real>(p: &BlockPlan, se: Option<usize>, seed: u64) -> PsaBlock<T> {
    let b = PsaBlock::new(p, se, 0.0).unwrap();
    let mut v = Visitor::new();
    b.visit(&mut v);
    randomize(&v, seed);
    b
}

/// The gradient reaching a block's input through the skip path is the
/// upstream gradient itself; the branch adds its own vector-Jacobian
/// product on top.
fn residual_gradient_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let p = plan(4, 8, 4, 2, 1, 9);
        let b1 = block::<f64>(&p, Some(2), 10 + seed);
        let b2 = block::<f64>(&p, Some(2), 20 + seed);
        let x = random_input::<f64>(&[2, 4, 9], seed).detach_parameter();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ctx = Ctx::train(&mut rng);
        let h = b1.forward(&x, &mut ctx).map_err(|e| e.to_string())?;
        h.retain_grad();
        let y = b2.forward(&h, &mut ctx).map_err(|e| e.to_string())?;
        let upstream = values(&random_input::<f64>(&[2, 4, 9], 100 + seed));
        y.backward_with(upstream.clone()).map_err(|e| e.to_string())?;
        let total = h.grad().ok_or("no gradient retained at the skip input")?;

        // Branch alone, on a detached copy of the same activation.
        let h2 = h.detach_parameter();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = b2.branch_forward(&h2, &mut Ctx::train(&mut rng)).map_err(|e| e.to_string())?;
        f.backward_with(upstream.clone()).map_err(|e| e.to_string())?;
        let through_branch = h2.grad().ok_or("no branch gradient")?;

        for ((t, g), u) in total.iter().zip(&through_branch).zip(&upstream) {
            worst = worst.max((t - (g + u)).abs());
        }
    }
    check(worst <= 1e-10, format!("max |dL/dx - (branch VJP + upstream)| = {worst:.2e} over 5 seeds"))
}

fn aggregation_equivalence() -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for &c in &[1usize, 2, 4, 8] {
        for k in 0..25u64 {
            let seed = c as u64 * 1000 + k;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = rng.gen_range(1..=3);
            let cin = [4, 8][rng.gen_range(0..2)];
            let stride = rng.gen_range(1..=2);
            let cout = if stride == 2 { 2 * cin } else { [cin, 8][rng.gen_range(0..2)] };
            let len = rng.gen_range(5..=12);
            let se = rng.gen_bool(0.5).then_some(2);
            let p = plan(cin, c * d, cout, c, stride, len);
            let b = block::<f32>(&p, se, seed);
            let x = random_input::<f32>(&[2, cin, len], seed + 7);
            let y = Arr::from_tensor(&b.forward(&x, &mut Ctx::eval()).map_err(|e| e.to_string())?);
            let mut v = Visitor::new();
            b.visit(&mut v);
            let oracle = branch_sum_block(&Weights::read(&v), &p, &Arr::from_tensor(&x), se.is_some());
            for (a, r) in y.v.iter().zip(&oracle.v) {
                worst = worst.max((a - r).abs() / r.abs().max(1.0));
            }
            cases += 1;
        }
    }
    within(t0.elapsed(), 60)?;
    check(
        worst <= 1e-6,
        format!("{cases} cases, C in {{1,2,4,8}}, worst error {worst:.2e} (f32 block vs explicit branch sum)"),
    )
}

/// Plain pre-activation bottleneck block: three BN-ReLU-conv stages, SE,
/// identity skip. Nothing grouped.
struct PlainBlock {
    bns: Vec<(Tensor<f32>, Tensor<f32>, psa_core::tensor::ops::RunningStats<f32>)>,
    convs: Vec<(Tensor<f32>, Tensor<f32>)>,
    se: (Tensor<f32>, Tensor<f32>, Tensor<f32>, Tensor<f32>),
}

impl PlainBlock {
    fn forward(&mut self, x: &Tensor<f32>) -> Tensor<f32> {
        let mut h = x.clone();
        for (i, (g, b, stats)) in self.bns.iter_mut().enumerate() {
            let n = batch_norm1d(&h, g, b, stats, Mode::Eval, BatchNormSpec::default()).unwrap();
            let (w, bias) = &self.convs[i];
            h = conv1d(&relu(&n), w, Some(bias), Conv1dSpec::new(1, 1, 1)).unwrap();
        }
        let (nb, c) = (h.shape()[0], h.shape()[1]);
        let pooled = reshape(&pool1d(&h, Pool::GlobalAvg).unwrap(), &[nb, c]).unwrap();
        let (w1, b1, w2, b2) = &self.se;
        let z = relu(&psa_core::tensor::ops::dense(&pooled, w1, b1).unwrap());
        let gate = sigmoid(&psa_core::tensor::ops::dense(&z, w2, b2).unwrap());
        residual_add(&scale_channels(&h, &gate).unwrap(), x).unwrap()
    }

    fn param_count(&self) -> usize {
        let bn: usize = self.bns.iter().map(|(g, b, _)| g.numel() + b.numel()).sum();
        let conv: usize = self.convs.iter().map(|(w, b)| w.numel() + b.numel()).sum();
        bn + conv + self.se.0.numel() + self.se.1.numel() + self.se.2.numel() + self.se.3.numel()
    }
}

fn resnet_collapse() -> Outcome {
    let p = plan(8, 16, 8, 1, 1, 11);
    let agg = block::<f32>(&p, Some(4), 3);
    let mut v = Visitor::new();
    agg.visit(&mut v);
    let find = |n: &str| v.params.iter().find(|q| q.name == n).unwrap().tensor.detach();
    let stats = |n: &str| {
        let s = v.buffers.iter().find(|b| b.0 == n).unwrap().1.lock().unwrap();
        s.clone()
    };
    let mut plain = PlainBlock {
        bns: ["conv_a", "conv_g", "conv_c"]
            .iter()
            .map(|l| {
                (
                    find(&format!("{l}.bn.gamma")),
                    find(&format!("{l}.bn.beta")),
                    stats(&format!("{l}.bn.running")),
                )
            })
            .collect(),
        convs: ["conv_a", "conv_g", "conv_c"]
            .iter()
            .map(|l| (find(&format!("{l}.conv.weight")), find(&format!("{l}.conv.bias"))))
            .collect(),
        se: (
            find("se.fc1.weight"),
            find("se.fc1.bias"),
            find("se.fc2.weight"),
            find("se.fc2.bias"),
        ),
    };
    let x = random_input::<f32>(&[3, 8, 11], 9);
    let a = agg.forward(&x, &mut Ctx::eval()).unwrap().to_vec();
    let b = plain.forward(&x).to_vec();
    let identical = a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits());
    let agg_params: usize = v.params.iter().map(|q| q.tensor.numel()).sum();
    // in*B*3+B, B*B*3+B, B*out*3+out, BN 2(in+B+B), SE out*out/r+out/r+out/r*out+out
    let analytic = 8 * 16 * 3 + 16 + 16 * 16 * 3 + 16 + 16 * 8 * 3 + 8 + 2 * (8 + 16 + 16) + 8 * 2 + 2 + 2 * 8 + 8;

    let agg_cfg = ModelConfig {
        cardinality: 1,
        bottleneck_width: 32,
        ..ModelConfig::tiny()
    };
    let res_cfg = ModelConfig {
        variant: Variant::PlainResnet,
        ..agg_cfg.clone()
    };
    let (pa, pr) = (count_params(&agg_cfg).unwrap(), count_params(&res_cfg).unwrap());
    check(
        identical && agg_params == plain.param_count() && agg_params == analytic && pa == pr,
        format!(
            "block outputs bit-identical: {identical}; params {agg_params} vs plain {} (analytic {analytic}); network params {pa} vs {pr}",
            plain.param_count()
        ),
    )
}

fn metric_oracles() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let params = TDcfParams::default();
    let c1 = params.p_tar * (params.c_miss_cm - params.c_miss_asv * params.p_miss_asv)
        - params.p_non * params.c_fa_asv * params.p_fa_asv;
    let c2 = params.c_fa_cm * params.p_spoof * (1.0 - params.p_miss_spoof_asv);
    let (mut e_eer, mut e_auc) = (0.0f64, 0.0f64);
    let mut tdcf_mismatch = 0;
    let sets = 150;
    for k in 0..sets {
        let (b, s) = random_scores(&mut rng, k % 3 == 0);
        let set = ScoreSet::from_scores(&b, &s).map_err(|e| e.to_string())?;
        e_eer = e_eer.max((compute_eer(&set).map_err(|e| e.to_string())?.0 - eer_oracle(&b, &s)).abs());
        e_auc = e_auc.max((compute_auc(&set).map_err(|e| e.to_string())? - auc_oracle(&b, &s)).abs());
        let oracle = candidate_thresholds(&b, &s)
            .into_iter()
            .map(|t| {
                let (pm, pf) = rates_at(&b, &s, t);
                (c1 * pm + c2 * pf) / c1.min(c2)
            })
            .fold(f64::INFINITY, f64::min);
        if compute_min_tdcf(&set, &params).map_err(|e| e.to_string())?.0 != oracle {
            tdcf_mismatch += 1;
        }
    }
    within(t0.elapsed(), 60)?;
    check(
        e_eer <= 1e-9 && e_auc <= 1e-9 && tdcf_mismatch == 0,
        format!("{sets} score sets: max EER err {e_eer:.1e}, max AUC err {e_auc:.1e}, min t-DCF mismatches {tdcf_mismatch}"),
    )
}

fn cumulative_eer_value() -> Outcome {
    let v = cumulative_eer(3.04, 1.26);
    check((v - 4.30).abs() <= 0.005, format!("cumulative EER of (3.04, 1.26) = {v:.4}"))
}

fn desk_scale_training() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let train = generate_synthetic_corpus(30, 1, &dir.path().join("train")).map_err(|e| e.to_string())?;
    let dev = generate_synthetic_corpus(30, 2, &dir.path().join("dev")).map_err(|e| e.to_string())?;
    let cert = separability_certificate(&train.clips);
    let cfg = RunConfig::parse("preset = tiny\n", Path::new(".")).map_err(|e| e.to_string())?;
    let r = train_loop(&train.clips, &dev.clips, &cfg.model, &cfg.train).map_err(|e| e.to_string())?;
    within(t0.elapsed(), 900)?;
    let s = &r.seeds[0];
    let reached = s.log.iter().filter_map(|e| e.train_accuracy).fold(0.0, f64::max);
    let first = s.log.iter().find(|e| e.train_accuracy == Some(1.0)).map(|e| e.epoch);
    check(
        cfg.train.epochs <= 30 && reached == 1.0 && s.dev_eer <= 0.05,
        format!(
            "{} epochs, train accuracy 100% first at epoch {first:?}, best epoch {} dev EER {:.4}, certificate {cert:.3}, {:.0} s",
            cfg.train.epochs,
            s.best_epoch,
            s.dev_eer,
            t0.elapsed().as_secs_f64()
        ),
    )
}

fn flops_accounting() -> Outcome {
    let f = count_flops(&ModelConfig::default()).map_err(|e| e.to_string())? as f64;
    check((0.9e9..=2.7e9).contains(&f), format!("reference configuration: {f:.3e} FLOPs (target 1.8e9 +-50%)"))
}

/// Amplitude of a sinusoid at `hz` by least-squares projection over the
/// middle half of the signal, clear of filter start-up.
fn tone_amplitude(x: &[f64], hz: f64) -> f64 {
    let (lo, hi) = (x.len() / 4, 3 * x.len() / 4);
    let w = 2.0 * std::f64::consts::PI * hz / 16000.0;
    let (mut c, mut s) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate().take(hi).skip(lo) {
        c += v * (w * i as f64).cos();
        s += v * (w * i as f64).sin();
    }
    let n = (hi - lo) as f64;
    2.0 * (c * c + s * s).sqrt() / n
}

fn tone(hz: f64) -> AudioClip {
    let w = 2.0 * std::f64::consts::PI * hz / 16000.0;
    AudioClip::new((0..16000).map(|i| 0.5 * (w * i as f64).sin()).collect(), 16000)
}

fn dsp_assertions() -> Outcome {
    let gain_db = |f: &dyn Fn(&AudioClip) -> AudioClip, hz: f64| {
        let out = f(&tone(hz));
        20.0 * (tone_amplitude(&out.samples, hz) / 0.5).log10()
    };
    let lp = |c: &AudioClip| lowpass_filter(c, 4000.0).unwrap();
    let hp = |c: &AudioClip| highpass_filter(c, 300.0).unwrap();
    let lp_stop = [5000.0, 6000.0, 7500.0].map(|f| gain_db(&lp, f));
    let lp_pass = [200.0, 1000.0, 3000.0].map(|f| gain_db(&lp, f));
    let hp_stop = [30.0, 60.0, 120.0].map(|f| gain_db(&hp, f));
    let hp_pass = [600.0, 2000.0, 6000.0].map(|f| gain_db(&hp, f));
    let stop_ok = lp_stop.iter().chain(&hp_stop).all(|&g| g <= -40.0);
    let pass_ok = lp_pass.iter().chain(&hp_pass).all(|&g| g.abs() <= 1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut z_err: f64 = 0.0;
    let mut lengths_ok = true;
    for _ in 0..50 {
        let n = rng.gen_range(1..150_000);
        let off: f64 = rng.gen_range(-3.0..3.0);
        let scale: f64 = rng.gen_range(0.01..10.0);
        let clip = AudioClip::new((0..n).map(|_| off + scale * rng.gen_range(-1.0..1.0)).collect(), 16000);
        let st = standardize_length(&clip, TARGET_SECONDS);
        lengths_ok &= st.len() == 64000;
        let z = zscore_normalize(&st, ZSCORE_EPSILON);
        let m = z.samples.iter().sum::<f64>() / z.len() as f64;
        let sd = (z.samples.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / z.len() as f64).sqrt();
        z_err = z_err.max(m.abs()).max((sd - 1.0).abs());
    }
    let worst_stop = lp_stop.iter().chain(&hp_stop).cloned().fold(f64::NEG_INFINITY, f64::max);
    let worst_pass = lp_pass.iter().chain(&hp_pass).map(|g| g.abs()).fold(0.0, f64::max);
    check(
        stop_ok && pass_ok && z_err <= 1e-6 && lengths_ok,
        format!(
            "stop band <= {worst_stop:.1} dB, pass band within {worst_pass:.2} dB, z-score err {z_err:.1e}, 64000-sample output {lengths_ok}"
        ),
    )
}

fn cli(args: &[&str]) -> i32 {
    let mut sink = Vec::new();
    psa_core::cli::run(std::iter::once("psa").chain(args.iter().copied()), &mut sink)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let p = |s: &str| d.join(s).to_string_lossy().into_owned();
    if cli(&["synth", "--n", "4", "--seed", "3", "--out", &p("tr")]) != 0
        || cli(&["synth", "--n", "4", "--seed", "4", "--out", &p("dv")]) != 0
    {
        return Err("synth failed".into());
    }
    let cfg = "preset = tiny\nepochs = 2\nseeds = 1,2\ninput_length = 16000\nspatial_dropout = 0.2\n\
               train_manifest = tr/manifest.txt\ndev_manifest = dv/manifest.txt\n";
    fs::write(d.join("c.cfg"), cfg).map_err(|e| e.to_string())?;
    for run in ["a", "b"] {
        if cli(&["train", "--config", &p("c.cfg"), "--out", &p(run)]) != 0 {
            return Err(format!("train run {run} failed"));
        }
        let ck = p(&format!("{run}/best_seed1.ckpt.json"));
        let out = p(&format!("{run}/scores.tsv"));
        if cli(&["score", "--checkpoint", &ck, "--manifest", &p("dv/manifest.txt"), "--out", &out]) != 0 {
            return Err(format!("score run {run} failed"));
        }
    }
    let files = [
        "train_log_seed1.csv",
        "train_log_seed2.csv",
        "best_seed1.ckpt.json",
        "best_seed2.ckpt.json",
        "dev_scores_seed1.tsv",
        "dev_scores_seed2.tsv",
        "run_result.json",
        "scores.tsv",
    ];
    let mut differing = Vec::new();
    for f in files {
        let a = fs::read(d.join("a").join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = fs::read(d.join("b").join(f)).map_err(|e| format!("{f}: {e}"))?;
        if a != b {
            differing.push(f);
        }
    }
    check(
        differing.is_empty(),
        format!("{} artifacts compared across two runs, differing: {differing:?}", files.len()),
    )
}

fn schedule() -> Outcome {
    let s = ScheduleConfig::default();
    let (l0, l1000, l4000) = (s.lr_at(0), s.lr_at(1000), s.lr_at(4000));
    let jump = [1e-5, 1e-7]
        .iter()
        .map(|e| (s.lr_at_continuous(1000.0 + e) - s.lr_at_continuous(1000.0 - e)).abs())
        .fold(0.0, f64::max);
    let step_gap = (s.lr_at(1001) - s.lr_at(1000)).abs();
    check(
        l0 == 0.0 && l1000 == 1e-4 && (l4000 - 5e-5).abs() <= 1e-12 && jump < 1e-7 * s.base_lr,
        format!(
            "lr(0)={l0}, lr(1000)={l1000:e}, lr(4000)={l4000:e}, |lr(1000+e)-lr(1000-e)| <= {jump:.1e}, one-step gap after warmup {step_gap:.1e}"
        ),
    )
}

fn ablation_harness() -> Outcome {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let train = generate_synthetic_corpus(4, 5, &dir.path().join("tr")).map_err(|e| e.to_string())?;
    let dev = generate_synthetic_corpus(4, 6, &dir.path().join("dv")).map_err(|e| e.to_string())?;
    let base = ModelConfig {
        input_length: 16000,
        ..ModelConfig::tiny()
    };
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 8,
        seeds: vec![1],
        track_train_accuracy: false,
        ..TrainConfig::default()
    };
    let cells = ablation_grid(&base, &[18, 34], 0.2);
    let rows = run_ablation(&cells, &cfg, &train.clips, &dev.clips).map_err(|e| e.to_string())?;
    let table = format_ablation(&rows);
    let lines: Vec<&str> = table.lines().collect();
    let shaped = lines.len() == 17
        && lines[0] == "Network\tEER(%)"
        && lines[1..].iter().all(|l| l.split('\t').count() == 2)
        && rows.iter().all(|r| (0.0..=1.0).contains(&r.eer));
    let names = ["ResNet-18", "SE-ResNet-34 (Spatial Dropout)", "Aggregated Nets-34", "SE-Aggregated Nets-18"];
    let named = names.iter().all(|n| rows.iter().any(|r| r.name == *n));
    for l in &lines {
        println!("      | {l}");
    }
    check(
        shaped && named,
        format!("{} cells (depths 18/34 x SE x dropout x family), {:.0} s", rows.len(), t0.elapsed().as_secs_f64()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("gradient correctness", gradient_correctness),
        ("residual gradient identity", residual_gradient_identity),
        ("aggregation equivalence", aggregation_equivalence),
        ("residual-network collapse at C=1", resnet_collapse),
        ("metric oracles", metric_oracles),
        ("cumulative EER arithmetic", cumulative_eer_value),
        ("desk-scale end-to-end training", desk_scale_training),
        ("FLOPs accounting", flops_accounting),
        ("DSP assertions", dsp_assertions),
        ("determinism", determinism),
        ("learning-rate schedule", schedule),
        ("ablation harness", ablation_harness),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let t0 = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {n:>2} PASS  {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {d} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
