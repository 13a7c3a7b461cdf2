use std::fs;
use std::path::Path;

use psa_core::cli;
use psa_core::data::parse_manifest;
use psa_core::metrics::read_score_file;

fn run(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let code = cli::run(std::iter::once("psa").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn small_corpora(d: &Path, n: usize) {
    assert_eq!(run(&["synth", "--n", &n.to_string(), "--seed", "1", "--out", &s(&d.join("tr"))]).0, 0);
    assert_eq!(run(&["synth", "--n", &n.to_string(), "--seed", "2", "--out", &s(&d.join("dv"))]).0, 0);
}

const SMALL_CFG: &str = "preset = tiny\nepochs = 1\ninput_length = 16000\n\
                         train_manifest = tr/manifest.txt\ndev_manifest = dv/manifest.txt\n";

#[test]
fn synth_train_score_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_corpora(d, 4);
    fs::write(d.join("c.cfg"), SMALL_CFG).unwrap();

    let (code, out) = run(&["train", "--config", &s(&d.join("c.cfg")), "--out", &s(&d.join("run"))]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("mean dev_EER"));
    let ckpt = d.join("run/best_seed1.ckpt.json");
    assert!(ckpt.exists());

    let scores = d.join("scores.tsv");
    let dev = d.join("dv/manifest.txt");
    assert_eq!(run(&["score", "--checkpoint", &s(&ckpt), "--manifest", &s(&dev), "--out", &s(&scores)]).0, 0);
    let lines = read_score_file(&scores).unwrap();
    assert_eq!(lines.len(), 12);
    assert!(lines.iter().all(|(_, v)| *v > 0.0 && *v < 1.0));

    let first = fs::read(&scores).unwrap();
    run(&["score", "--checkpoint", &s(&ckpt), "--manifest", &s(&dev), "--out", &s(&scores)]);
    assert_eq!(first, fs::read(&scores).unwrap());

    let (code, out) = run(&["evaluate", "--checkpoint", &s(&ckpt), "--manifest", &s(&dev)]);
    assert_eq!(code, 0);
    for k in ["EER ", "AUC ", "min_tDCF ", "EER_LA ", "EER_PA "] {
        assert!(out.contains(k), "missing {k} in {out}");
    }
}

#[test]
fn evaluate_separable_score_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("s.txt"), "a 0.9\nb 0.8\nc 0.1\nd 0.2\n").unwrap();
    fs::write(d.join("k.txt"), "a bonafide -\nb bonafide -\nc spoof LA01\nd spoof PA01\n").unwrap();
    let (code, out) = run(&["evaluate", "--scores", &s(&d.join("s.txt")), "--keys", &s(&d.join("k.txt"))]);
    assert_eq!(code, 0, "{out}");
    assert!(out.lines().any(|l| l == "EER 0.0000"), "{out}");
}

#[test]
fn sweep_prints_one_row_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_corpora(d, 2);
    fs::write(d.join("c.cfg"), SMALL_CFG).unwrap();
    let (code, out) = run(&[
        "sweep",
        "--grid",
        "1x64,2x40,4x24,8x14,16x4,8x32,4x64",
        "--config",
        &s(&d.join("c.cfg")),
    ]);
    assert_eq!(code, 0, "{out}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "setting\tparams\tAUC_LA\tAUC_PA");
    assert_eq!(lines.len(), 8);
    assert_eq!(lines[1].split('\t').next(), Some("1x64d"));
    assert_eq!(lines[7].split('\t').next(), Some("4x64d"));
}

#[test]
fn augment_writes_one_copy_per_spec() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // 4 per class is 12 clips; keep 10 of them.
    run(&["synth", "--n", "4", "--seed", "5", "--out", &s(&d.join("src"))]);
    let mut m = parse_manifest(&d.join("src/manifest.txt")).unwrap();
    m.entries.truncate(10);
    m.write(&d.join("src/ten.txt")).unwrap();
    let (code, out) = run(&[
        "augment",
        "--manifest",
        &s(&d.join("src/ten.txt")),
        "--out",
        &s(&d.join("aug")),
        "--specs",
        "highpass,lowpass,trim,reverb,highpass:800",
    ]);
    assert_eq!(code, 0, "{out}");
    let aug = parse_manifest(&d.join("aug/manifest.txt")).unwrap();
    assert_eq!(aug.entries.len(), 60);
    assert_eq!(aug.counts(), (m.counts().0 * 6, m.counts().1 * 6));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&["--help"]).0, 0);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "preset = tiny\nlearning_speed = 3\n").unwrap();
    let mut err = Vec::new();
    let code = cli::run(["psa", "train", "--config", &s(&cfg)], &mut err);
    assert_eq!(code, 2);

    let missing = dir.path().join("nope.txt");
    assert_eq!(run(&["evaluate", "--scores", &s(&missing), "--keys", &s(&missing)]).0, 3);
}

#[test]
fn config_error_names_the_key() {
    let e = psa_core::data::RunConfig::parse("preset = tiny\nlearning_speed = 3\n", Path::new(".")).unwrap_err();
    assert!(e.to_string().contains("learning_speed"), "{e}");
}

#[test]
fn gradcheck_subcommand_reports_all_ops() {
    let (code, out) = run(&["gradcheck", "--cases", "2"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.trim_end().ends_with("checks passed"));
    assert_eq!(out.lines().filter(|l| l.contains("max_rel_err")).count(), 17);
}
