//! End-to-end runs of the `mepsnet` binary: exit codes, artifacts on disk,
//! reproducibility of whole output trees, and the echoed-config round trip.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shdd_synth::Manifest;
use tempfile::TempDir;

fn mepsnet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mepsnet"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "command failed\nstdout:\n{}\nstderr:\n{}",
        stdout(out),
        stderr(out)
    );
}

/// Generates a small synthetic dataset under `<dir>/dataset`.
fn generate_fixture(dir: &Path) {
    let out = mepsnet(
        dir,
        &[
            "generate",
            "--synthetic-clean",
            "3",
            "--out",
            "dataset",
            "--level",
            "moderate",
            "--seed",
            "7",
        ],
    );
    assert_ok(&out);
}

/// The smallest architecture, as repeated --set overrides.
const TINY_SETS: &[&str] = &[
    "--set",
    "model.n_experts=2",
    "--set",
    "model.expert_width=4",
    "--set",
    "model.n_srir_per_expert=1",
    "--set",
    "model.n_sresidual_per_srir=1",
    "--set",
    "model.n_templates=2",
    "--set",
    "model.fusion_reduction=4",
    "--set",
    "train.batch=2",
    "--set",
    "train.patch=24",
];

fn train_fixture(dir: &Path, out_name: &str, iters: &str) {
    let iters_set = format!("train.iters={iters}");
    let mut args = vec!["train", "--data", "dataset", "--out", out_name, "--quiet"];
    args.extend_from_slice(TINY_SETS);
    args.extend_from_slice(&["--set", &iters_set]);
    let out = mepsnet(dir, &args);
    assert_ok(&out);
}

/// All files under `root`, as paths relative to it, sorted.
fn tree(root: &Path) -> Vec<PathBuf> {
    fn walk(dir: &Path, root: &Path, acc: &mut Vec<PathBuf>) {
        for entry in fs::read_dir(dir).expect("readable dir") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                walk(&path, root, acc);
            } else {
                acc.push(path.strip_prefix(root).expect("under root").to_path_buf());
            }
        }
    }
    let mut acc = Vec::new();
    walk(root, root, &mut acc);
    acc.sort();
    acc
}

fn assert_trees_identical(a: &Path, b: &Path) {
    let ta = tree(a);
    let tb = tree(b);
    assert_eq!(ta, tb, "file lists differ");
    for rel in ta {
        let ba = fs::read(a.join(&rel)).expect("readable");
        let bb = fs::read(b.join(&rel)).expect("readable");
        assert_eq!(ba, bb, "{} differs between runs", rel.display());
    }
}

#[test]
fn usage_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let unknown = mepsnet(tmp.path(), &["frobnicate"]);
    assert_eq!(unknown.status.code(), Some(2));

    let missing = mepsnet(tmp.path(), &["eval", "--data", "d", "--identity"]);
    assert_eq!(missing.status.code(), Some(2), "missing --out");

    let conflict = mepsnet(
        tmp.path(),
        &[
            "generate",
            "--clean",
            "c",
            "--synthetic-clean",
            "2",
            "--out",
            "o",
        ],
    );
    assert_eq!(conflict.status.code(), Some(2), "conflicting clean sources");
}

#[test]
fn runtime_failures_exit_1() {
    let tmp = TempDir::new().unwrap();
    let out = mepsnet(
        tmp.path(),
        &["eval", "--data", "missing", "--identity", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).starts_with("error:"), "got: {}", stderr(&out));

    let bad_level = mepsnet(
        tmp.path(),
        &[
            "generate",
            "--synthetic-clean",
            "1",
            "--level",
            "apocalyptic",
            "--out",
            "o",
        ],
    );
    assert_eq!(bad_level.status.code(), Some(1));
}

#[test]
fn generate_writes_dataset_manifest_and_echo() {
    let tmp = TempDir::new().unwrap();
    generate_fixture(tmp.path());
    let root = tmp.path().join("dataset");

    for sub in ["train", "val", "clean/train", "clean/val", "manifest.json"] {
        assert!(root.join(sub).exists(), "missing {sub}");
    }

    let manifest = Manifest::load(&root.join("manifest.json")).expect("manifest parses");
    assert!(!manifest.entries.is_empty());
    // moderate chops each image 3 times, so every entry carries 4 regions
    for entry in &manifest.entries {
        assert_eq!(entry.regions.len(), 4, "entry {}", entry.source);
    }

    let echo = fs::read_to_string(root.join("config.toml")).expect("echo exists");
    assert!(echo.contains("level = \"moderate\""), "echo:\n{echo}");
    assert!(echo.contains("seed = 7"));
}

#[test]
fn generate_reruns_and_thread_counts_are_byte_identical() {
    // identical relative paths inside separate working dirs, so even the
    // echoed config must come out byte-identical
    let dirs = [TempDir::new().unwrap(), TempDir::new().unwrap(), TempDir::new().unwrap()];
    for (tmp, threads) in dirs.iter().zip(["1", "1", "4"]) {
        let out = mepsnet(
            tmp.path(),
            &[
                "generate",
                "--synthetic-clean",
                "3",
                "--out",
                "dataset",
                "--seed",
                "11",
                "--threads",
                threads,
            ],
        );
        assert_ok(&out);
    }
    assert_trees_identical(&dirs[0].path().join("dataset"), &dirs[1].path().join("dataset"));
    assert_trees_identical(&dirs[0].path().join("dataset"), &dirs[2].path().join("dataset"));
}

#[test]
fn train_writes_checkpoints_log_and_echo() {
    let tmp = TempDir::new().unwrap();
    generate_fixture(tmp.path());
    train_fixture(tmp.path(), "run", "3");

    let run = tmp.path().join("run");
    for name in ["model.ckpt", "optim.ckpt", "train.log", "config.toml"] {
        assert!(run.join(name).exists(), "missing {name}");
    }

    let log = fs::read_to_string(run.join("train.log")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 3);
    for (i, line) in lines.iter().enumerate() {
        assert!(line.starts_with(&format!("iter={i} loss=")), "line: {line}");
    }

    let echo = fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(echo.contains("n_experts = 2"), "echo:\n{echo}");
    assert!(echo.contains("iters = 3"), "echo:\n{echo}");
}

#[test]
fn echoed_config_rerun_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    generate_fixture(tmp.path());
    train_fixture(tmp.path(), "run1", "4");

    // second run consumes only the echoed config, no --set flags
    let out = mepsnet(
        tmp.path(),
        &[
            "train", "--data", "dataset", "--out", "run2", "--quiet", "--config",
            "run1/config.toml",
        ],
    );
    assert_ok(&out);

    for name in ["model.ckpt", "optim.ckpt", "train.log", "config.toml"] {
        let a = fs::read(tmp.path().join("run1").join(name)).unwrap();
        let b = fs::read(tmp.path().join("run2").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn resume_continues_the_log_and_architecture_mismatch_fails() {
    let tmp = TempDir::new().unwrap();
    generate_fixture(tmp.path());
    train_fixture(tmp.path(), "run", "2");
    train_fixture(tmp.path(), "run", "5"); // reruns 0..5 fresh, overwriting

    // a fresh 5-iteration run and a 2-then-resume-to-5 run share a prefix
    let mut args = vec![
        "train", "--data", "dataset", "--out", "resumed", "--quiet",
    ];
    args.extend_from_slice(TINY_SETS);
    args.push("--set");
    args.push("train.iters=2");
    assert_ok(&mepsnet(tmp.path(), &args));

    let mut resume = vec![
        "train", "--data", "dataset", "--out", "resumed", "--quiet", "--resume",
    ];
    resume.extend_from_slice(TINY_SETS);
    resume.push("--set");
    resume.push("train.iters=5");
    assert_ok(&mepsnet(tmp.path(), &resume));

    let full = fs::read(tmp.path().join("run/model.ckpt")).unwrap();
    let stitched = fs::read(tmp.path().join("resumed/model.ckpt")).unwrap();
    assert_eq!(full, stitched, "resume diverged from the unbroken run");

    let log = fs::read_to_string(tmp.path().join("resumed/train.log")).unwrap();
    assert_eq!(log.lines().count(), 5, "log:\n{log}");

    // resuming under a different architecture must fail, not corrupt
    let mut wrong = vec![
        "train", "--data", "dataset", "--out", "resumed", "--quiet", "--resume",
    ];
    wrong.extend_from_slice(TINY_SETS);
    wrong.extend_from_slice(&["--set", "model.n_experts=3", "--set", "train.iters=9"]);
    let out = mepsnet(tmp.path(), &wrong);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("does not match"), "{}", stderr(&out));
}

#[test]
fn eval_identity_matches_baseline_and_writes_report() {
    let tmp = TempDir::new().unwrap();
    generate_fixture(tmp.path());
    let out = mepsnet(
        tmp.path(),
        &[
            "eval", "--data", "dataset", "--split", "val", "--identity", "--out", "scores",
        ],
    );
    assert_ok(&out);

    let text = fs::read_to_string(tmp.path().join("scores/eval_val.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    for key in [
        "split",
        "n",
        "mean_psnr",
        "mean_ssim",
        "baseline_psnr",
        "baseline_ssim",
        "per_image",
    ] {
        assert!(report.get(key).is_some(), "missing key {key}");
    }
    assert_eq!(report["split"], "val");
    assert_eq!(report["mean_psnr"], report["baseline_psnr"]);
    assert_eq!(report["mean_ssim"], report["baseline_ssim"]);
    for img in report["per_image"].as_array().unwrap() {
        assert_eq!(img["psnr"], img["baseline_psnr"]);
        assert_eq!(img["ssim"], img["baseline_ssim"]);
    }
}

#[test]
fn eval_with_checkpoint_writes_finite_scores() {
    let tmp = TempDir::new().unwrap();
    generate_fixture(tmp.path());
    train_fixture(tmp.path(), "run", "2");

    let out = mepsnet(
        tmp.path(),
        &[
            "eval",
            "--data",
            "dataset",
            "--split",
            "val",
            "--checkpoint",
            "run/model.ckpt",
            "--out",
            "scores",
            "--threads",
            "2",
        ],
    );
    assert_ok(&out);

    let text = fs::read_to_string(tmp.path().join("scores/eval_val.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["n"], 1);
    let psnr = report["mean_psnr"].as_f64().unwrap();
    assert!(psnr.is_finite() && psnr > 0.0, "psnr {psnr}");
}

#[test]
fn restore_writes_a_png_of_matching_size() {
    let tmp = TempDir::new().unwrap();
    generate_fixture(tmp.path());
    train_fixture(tmp.path(), "run", "2");

    let out = mepsnet(
        tmp.path(),
        &[
            "restore",
            "--checkpoint",
            "run/model.ckpt",
            "--input",
            "dataset/val",
            "--out",
            "restored",
        ],
    );
    assert_ok(&out);

    let originals = tree(&tmp.path().join("dataset/val"));
    let restored = tree(&tmp.path().join("restored"));
    let expected: Vec<PathBuf> = originals.clone();
    let mut got: Vec<PathBuf> = restored
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .cloned()
        .collect();
    got.sort();
    assert_eq!(got, expected);

    let first = &originals[0];
    let a = image::open(tmp.path().join("dataset/val").join(first)).unwrap();
    let b = image::open(tmp.path().join("restored").join(first)).unwrap();
    assert_eq!((a.width(), a.height()), (b.width(), b.height()));
}

#[test]
fn inspect_grad_check_verifies_gradients() {
    let tmp = TempDir::new().unwrap();
    let out = mepsnet(tmp.path(), &["inspect", "grad-check"]);
    assert_ok(&out);
    let text = stdout(&out);
    assert!(text.contains("gradients verified"), "{text}");
    assert!(text.contains("parameters audited: 961"), "{text}");
}

#[test]
fn inspect_param_count_reports_sharing_ratio() {
    let tmp = TempDir::new().unwrap();
    let out = mepsnet(tmp.path(), &["inspect", "param-count"]);
    assert_ok(&out);
    let text = stdout(&out);
    assert!(text.contains("12112691"), "{text}");
    assert!(text.contains("10564627"), "{text}");

    let ratio_line = text
        .lines()
        .find(|l| l.starts_with("total ratio"))
        .expect("ratio line");
    let ratio: f64 = ratio_line
        .rsplit(' ')
        .next()
        .unwrap()
        .parse()
        .expect("ratio parses");
    assert!(ratio <= 1.20, "ratio {ratio}");

    // --set overrides reshape the census
    let tiny = mepsnet(
        tmp.path(),
        &[
            "inspect",
            "param-count",
            "--set",
            "model.n_experts=2",
            "--set",
            "model.expert_width=4",
            "--set",
            "model.n_srir_per_expert=1",
            "--set",
            "model.n_sresidual_per_srir=1",
            "--set",
            "model.n_templates=2",
            "--set",
            "model.fusion_reduction=4",
        ],
    );
    assert_ok(&tiny);
    assert!(stdout(&tiny).contains("961"), "{}", stdout(&tiny));
}

#[test]
fn inspect_spectrum_verifies_slope() {
    let tmp = TempDir::new().unwrap();
    let out = mepsnet(tmp.path(), &["inspect", "spectrum"]);
    assert_ok(&out);
    assert!(stdout(&out).contains("spectrum verified"), "{}", stdout(&out));
}

#[test]
fn inspect_features_writes_one_map_per_expert() {
    let tmp = TempDir::new().unwrap();
    generate_fixture(tmp.path());
    train_fixture(tmp.path(), "run", "1");

    let input = tree(&tmp.path().join("dataset/clean/train"))[0].clone();
    let input_path = tmp.path().join("dataset/clean/train").join(input);
    let out = mepsnet(
        tmp.path(),
        &[
            "inspect",
            "features",
            "--checkpoint",
            "run/model.ckpt",
            "--input",
            input_path.to_str().unwrap(),
            "--out",
            "feats",
        ],
    );
    assert_ok(&out);
    assert!(tmp.path().join("feats/expert_0.png").exists());
    assert!(tmp.path().join("feats/expert_1.png").exists());
    assert!(!tmp.path().join("feats/expert_2.png").exists());
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = TempDir::new().unwrap();
    generate_fixture(tmp.path());
    let out = mepsnet(
        tmp.path(),
        &[
            "train", "--data", "dataset", "--out", "run", "--set", "train.itres=5",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("train.itres"), "{}", stderr(&out));
}

/// The config files shipped at the repo root must stay in lockstep with the
/// built-in presets.
#[test]
fn shipped_config_files_match_builtin_presets() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let tmp = TempDir::new().unwrap();

    let desk = mepsnet(
        tmp.path(),
        &[
            "inspect",
            "param-count",
            "--config",
            root.join("desk.toml").to_str().unwrap(),
        ],
    );
    assert_ok(&desk);
    let desk_builtin = mepsnet(tmp.path(), &["inspect", "param-count", "--preset", "desk"]);
    assert_ok(&desk_builtin);
    assert_eq!(stdout(&desk), stdout(&desk_builtin));

    let paper = mepsnet(
        tmp.path(),
        &[
            "inspect",
            "param-count",
            "--config",
            root.join("paper.toml").to_str().unwrap(),
        ],
    );
    assert_ok(&paper);
    let paper_builtin = mepsnet(tmp.path(), &["inspect", "param-count", "--preset", "paper"]);
    assert_ok(&paper_builtin);
    assert_eq!(stdout(&paper), stdout(&paper_builtin));
    assert!(stdout(&paper).contains("12112691"), "{}", stdout(&paper));
}
