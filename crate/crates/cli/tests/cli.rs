use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pu3_core::dataset::{generate_curve, write_points, CurveKind};
use pu3_core::net::{init_network, save_checkpoint, NetConfig};

fn pu3(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pu3"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = pu3(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    pu3(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files(&path));
        } else {
            out.push((
                path.strip_prefix(dir).unwrap().to_path_buf(),
                fs::read(&path).unwrap(),
            ));
        }
    }
    out.sort();
    out
}

fn small_dataset(dir: &Path) {
    ok(&[
        "gen-data",
        "--curves",
        "4",
        "--levels",
        "2",
        "--n0",
        "40",
        "--out",
        s(dir),
    ]);
}

const FAST: [&str; 6] = [
    "--steps-per-stage",
    "2",
    "--batch",
    "2",
    "--patch-size",
    "40",
];

#[test]
fn gen_data_layout_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    small_dataset(&a);
    small_dataset(&b);
    let dirs: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_dir())
        .collect();
    assert_eq!(dirs.len(), 4);
    for d in dirs {
        for f in ["P0.xyz", "T1.xyz", "T2.xyz"] {
            assert!(d.join(f).is_file());
        }
        assert!(!d.join("T3.xyz").exists());
    }
    assert_eq!(files(&a), files(&b));
}

#[test]
fn validation_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = s(tmp.path());
    assert_eq!(code(&["gen-data", "--n0", "2", "--out", out]), 1);
    assert_eq!(code(&["gen-data", "--bogus"]), 1);
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "no_such_key = 3\n").unwrap();
    assert_eq!(code(&["gen-data", "--config", s(&cfg), "--out", out]), 1);
    assert_eq!(code(&["train", "--data", out, "--out", out]), 1);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn train_emits_one_checkpoint_per_stage_and_resumes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data);
    let full = tmp.path().join("full");
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--levels",
        "2",
        "--out",
        s(&full),
    ];
    args.extend(FAST);
    ok(&args);
    for st in 1..=3 {
        assert!(full.join(format!("ckpt_stage{st}.bin")).is_file());
    }
    assert!(!full.join("ckpt_stage4.bin").exists());
    let log = fs::read_to_string(full.join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 3 * 2);

    // Interrupted after stage 1: only its checkpoint and log lines exist.
    let part = tmp.path().join("part");
    fs::create_dir(&part).unwrap();
    fs::copy(full.join("ckpt_stage1.bin"), part.join("ckpt_stage1.bin")).unwrap();
    let head: String = log.lines().take(3).map(|l| format!("{l}\n")).collect();
    fs::write(part.join("train_log.csv"), head).unwrap();
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--levels",
        "2",
        "--resume",
        "--out",
        s(&part),
    ];
    args.extend(FAST);
    ok(&args);
    assert_eq!(fs::read_to_string(part.join("train_log.csv")).unwrap(), log);
    assert_eq!(
        fs::read(part.join("ckpt_stage3.bin")).unwrap(),
        fs::read(full.join("ckpt_stage3.bin")).unwrap()
    );

    // Requesting more levels than the dataset holds is a validation error.
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--levels",
        "3",
        "--out",
        s(&full),
    ];
    args.extend(FAST);
    assert_eq!(code(&args), 1);
}

#[test]
fn ablation_toggles_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data);
    let out = tmp.path().join("run");
    let mut args = vec![
        "train",
        "--data",
        s(&data),
        "--levels",
        "1",
        "--no-feature-knn",
        "--no-dense-links",
        "--out",
        s(&out),
    ];
    args.extend(FAST);
    ok(&args);
    let bytes = fs::read(out.join("ckpt_stage1.bin")).unwrap();
    let text = String::from_utf8_lossy(&bytes);
    assert!(text.contains("use_feature_knn = false"));
    assert!(text.contains("use_dense_links = false"));
    let input = data.join("curve_000").join("P0.xyz");
    let pred = tmp.path().join("pred.xyz");
    let printed = ok(&[
        "upsample",
        "--ckpt",
        s(&out.join("ckpt_stage1.bin")),
        "--in",
        s(&input),
        "--out",
        s(&pred),
    ]);
    assert_eq!(printed.trim(), "80");
}

fn write_fresh_checkpoint(path: &Path, levels: usize, stage: usize) {
    let cfg = NetConfig {
        levels,
        dim: 2,
        ..NetConfig::default()
    };
    save_checkpoint(path, &init_network(&cfg, 0).unwrap(), stage).unwrap();
}

#[test]
fn upsample_counts_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let ckpt = tmp.path().join("ckpt_stage7.bin");
    write_fresh_checkpoint(&ckpt, 4, 7);
    let (curve, _) = generate_curve(CurveKind::Fourier, 1).unwrap();
    let input = tmp.path().join("in.xyz");
    write_points(&input, &curve.sample_uniform(625).unwrap()).unwrap();
    let out = tmp.path().join("out.xyz");
    let printed = ok(&[
        "upsample",
        "--ckpt",
        s(&ckpt),
        "--in",
        s(&input),
        "--levels",
        "4",
        "--out",
        s(&out),
    ]);
    assert_eq!(printed.trim(), "10000");
    let lines = fs::read_to_string(&out).unwrap();
    assert_eq!(
        lines
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .count(),
        10000
    );

    let printed = ok(&[
        "upsample",
        "--ckpt",
        s(&ckpt),
        "--in",
        s(&input),
        "--levels",
        "1",
        "--out",
        s(&out),
    ]);
    assert_eq!(printed.trim(), "1250");

    let early = tmp.path().join("ckpt_stage3.bin");
    write_fresh_checkpoint(&early, 4, 3);
    assert_eq!(
        code(&[
            "upsample",
            "--ckpt",
            s(&early),
            "--in",
            s(&input),
            "--levels",
            "3",
            "--out",
            s(&out)
        ]),
        1
    );

    let corrupt = tmp.path().join("bad.bin");
    let mut bytes = fs::read(&ckpt).unwrap();
    bytes[3] = b'X';
    fs::write(&corrupt, bytes).unwrap();
    let res = pu3(&[
        "upsample",
        "--ckpt",
        s(&corrupt),
        "--in",
        s(&input),
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("not a checkpoint file"));

    let tiny = tmp.path().join("tiny.xyz");
    write_points(&tiny, &curve.sample_uniform(10).unwrap()).unwrap();
    assert_eq!(
        code(&[
            "upsample",
            "--ckpt",
            s(&ckpt),
            "--in",
            s(&tiny),
            "--out",
            s(&out)
        ]),
        1
    );
    assert_eq!(
        code(&[
            "upsample",
            "--ckpt",
            s(&ckpt),
            "--in",
            "missing.xyz",
            "--out",
            s(&out)
        ]),
        1
    );
}

#[test]
fn numeric_failure_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = NetConfig {
        levels: 1,
        dim: 2,
        ..NetConfig::default()
    };
    let mut params = init_network(&cfg, 0).unwrap();
    let head = params.unit(0).expand.last().unwrap().bias;
    params.tensors_mut()[head].data_mut()[0] = f64::NAN;
    let ckpt = tmp.path().join("nan.bin");
    save_checkpoint(&ckpt, &params, 1).unwrap();
    let (curve, _) = generate_curve(CurveKind::Circle, 0).unwrap();
    let input = tmp.path().join("in.xyz");
    write_points(&input, &curve.sample_uniform(50).unwrap()).unwrap();
    let out = tmp.path().join("out.xyz");
    assert_eq!(
        code(&[
            "upsample",
            "--ckpt",
            s(&ckpt),
            "--in",
            s(&input),
            "--out",
            s(&out)
        ]),
        2
    );
}

#[test]
fn eval_reports_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data);
    let t2 = data.join("curve_001").join("T2.xyz");
    let report = tmp.path().join("report.txt");
    let plot = tmp.path().join("plot.svg");
    ok(&[
        "eval",
        "--pred",
        s(&t2),
        "--ref",
        s(&t2),
        "--data",
        s(&data),
        "--example",
        "curve_001",
        "--out",
        s(&report),
        "--plot",
        s(&plot),
    ]);
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("chamfer = 0e0"));
    assert!(text.contains("hausdorff = 0e0"));
    assert!(text.contains("point_to_curve = "));
    let svg = fs::read_to_string(&plot).unwrap();
    assert_eq!(svg.matches("<circle").count(), 160);
    assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));

    let p0 = data.join("curve_001").join("P0.xyz");
    let mismatch = tmp.path().join("m.xyz");
    fs::write(&mismatch, "0 0 0\n1 1 1\n2 2 2\n").unwrap();
    assert_eq!(
        code(&[
            "eval",
            "--pred",
            s(&mismatch),
            "--ref",
            s(&p0),
            "--out",
            s(&report)
        ]),
        1
    );
    assert_eq!(
        code(&[
            "eval",
            "--pred",
            "nope.xyz",
            "--ref",
            s(&p0),
            "--out",
            s(&report)
        ]),
        1
    );

    let ckpt = tmp.path().join("ckpt_stage1.bin");
    write_fresh_checkpoint(&ckpt, 1, 1);
    let sweep = tmp.path().join("sweep.csv");
    let printed = ok(&[
        "eval",
        "--ckpt",
        s(&ckpt),
        "--data",
        s(&data),
        "--split",
        "all",
        "--sweep-noise",
        "--out",
        s(&sweep),
    ]);
    assert!(printed.contains("6 settings over 4 shapes"), "{printed}");
    let csv = fs::read_to_string(&sweep).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.lines().skip(1).all(|l| l.starts_with("noise,")));
    assert_eq!(
        code(&[
            "eval",
            "--ckpt",
            s(&ckpt),
            "--data",
            s(&data),
            "--sweep-drop",
            "1.5",
            "--out",
            s(&sweep)
        ]),
        1
    );
}
