use std::path::Path;
use std::process::{Command, Output};

use wosno::inpaint::GrayImage;

fn wosno(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wosno"))
        .current_dir(dir)
        .env_remove("WOSNO_WORKERS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

/// Splits an artifact into its provenance line and the rest.
fn header_and_body(path: &Path) -> (String, String) {
    let text = std::fs::read_to_string(path).unwrap();
    let (head, body) = text.split_once('\n').unwrap();
    (head.to_string(), body.to_string())
}

fn csv_rows(body: &str) -> Vec<Vec<String>> {
    body.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn constant_boundary_field_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "solve.json",
        r#"{"problem": {"kind": "constant", "boundary": 1.0},
            "points": {"kind": "random", "count": 100},
            "trajectories": 50}"#,
    );
    let out = wosno(dir.path(), &["solve", "-c", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let (head, body) = header_and_body(&dir.path().join("solve.csv"));
    assert!(head.starts_with("# wosno ") && head.contains("seed=0") && head.contains("config="));
    let rows = csv_rows(&body);
    assert_eq!(body.lines().next(), Some("x,y,mean,variance,n_samples"));
    assert_eq!(rows.len(), 100);
    assert!(rows
        .iter()
        .all(|r| r[2] == "1" && r[3] == "0" && r[4] == "50"));
}

#[test]
fn solve_output_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "solve.json",
        r#"{"problem": {"kind": "linear", "params": {"c1": 0.1, "c2": -0.05, "beta": [0.5, -0.3],
              "mu": [[0.1, 0.2], [-0.2, 0.0]], "b": [0.3, -0.2, 0.1, 0.4, -0.1]}},
            "points": {"kind": "grid", "resolution": 6},
            "trajectories": 700,
            "run": {"seed": 11}}"#,
    );
    let mut bodies = Vec::new();
    for w in ["1", "4", "8"] {
        let out_dir = format!("w{w}");
        let out = wosno(
            dir.path(),
            &["solve", "-c", &cfg, "--workers", w, "--out", &out_dir],
        );
        assert!(out.status.success(), "{}", stderr(&out));
        let (head, body) = header_and_body(&dir.path().join(&out_dir).join("solve.csv"));
        assert!(head.contains(&format!("workers={w} ")), "{head}");
        bodies.push((head.replace(&format!("workers={w}"), "workers=?"), body));
    }
    assert!(bodies.windows(2).all(|p| p[0] == p[1]));
}

#[test]
fn unit_source_disk_center_matches_analytic_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = wosno(
        dir.path(),
        &[
            "solve",
            "--problem.kind=constant",
            "--problem.source=1",
            "--points.kind=list",
            "--points.points=[[0,0]]",
            "--trajectories=100000",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let (_, body) = header_and_body(&dir.path().join("solve.csv"));
    let row = &csv_rows(&body)[0];
    let (mean, var): (f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
    let se = (var / 1e5).sqrt();
    assert!((mean + 0.25).abs() <= 3.0 * se, "{mean} ± {se}");
}

#[test]
fn greens_check_passes_by_default_and_fails_with_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let ok = wosno(dir.path(), &["greens-check"]);
    assert_eq!(ok.status.code(), Some(0), "{}", stderr(&ok));
    let text = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 9);
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("greens_check.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["pass"], true);
    assert!(report["header"].as_str().unwrap().starts_with("wosno "));
    let bad = wosno(
        dir.path(),
        &["greens-check", "--samples=1000", "--mass_tolerance=1e-12"],
    );
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("check failed"));
}

#[test]
fn empty_configs_are_rejected_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, field) in [
        ("train", "family"),
        ("inpaint", "image"),
        ("bench", "problem"),
        ("solve", "problem"),
    ] {
        let out = wosno(dir.path(), &[cmd]);
        assert_eq!(out.status.code(), Some(1), "{cmd}");
        assert!(
            stderr(&out).contains(&format!("missing field `{field}`")),
            "{cmd}: {}",
            stderr(&out)
        );
    }
}

#[test]
fn config_errors_carry_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        "{\n  \"problem\": {\"kind\": \"constant\"},\n  \"trajectories\": \"many\"\n}",
    );
    let out = wosno(dir.path(), &["solve", "-c", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(
        err.contains("trajectories") && err.contains("line 3"),
        "{err}"
    );
    let out = wosno(
        dir.path(),
        &["solve", "--problem.kind=constant", "--nonsense=1"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nonsense"));
    let out = wosno(dir.path(), &["solve", "-c", "missing.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn worker_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_wosno"))
        .current_dir(dir.path())
        .env("WOSNO_WORKERS", "3")
        .args([
            "solve",
            "--problem.kind=constant",
            "--points.kind=random",
            "--points.count=4",
            "--trajectories=2",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let (head, _) = header_and_body(&dir.path().join("solve.csv"));
    assert!(head.contains("workers=3"), "{head}");
    let out = Command::new(env!("CARGO_BIN_EXE_wosno"))
        .current_dir(dir.path())
        .env("WOSNO_WORKERS", "lots")
        .args(["solve", "--problem.kind=constant"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn train_writes_checkpoint_history_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "train.json",
        r#"{"family": {"kind": "linear"}, "hidden": [16],
            "train": {"steps": 30, "pool_size": 10, "points_per_instance": 4,
                      "instances_per_step": 2, "trajectories": 4},
            "held_out": {"instances": 3, "points": 2, "reference_trajectories": 200},
            "run": {"seed": 4, "output_dir": "run"}}"#,
    );
    let out = wosno(dir.path(), &["train", "-c", &cfg]);
    assert!(out.status.success(), "{}", stderr(&out));
    let run = dir.path().join("run");
    let (head, body) = header_and_body(&run.join("loss.csv"));
    assert!(head.contains("seed=4"));
    assert_eq!(body.lines().next(), Some("epoch,loss,lr,wall_clock_s"));
    assert_eq!(body.lines().count(), 31);
    let ckpt = std::fs::read(run.join("model.bin")).unwrap();
    let first_line = ckpt.split(|b| *b == b'\n').next().unwrap();
    let first_line = String::from_utf8_lossy(first_line);
    assert!(
        first_line.starts_with("WOSNO-MODEL 1 wosno ") && first_line.contains("seed=4"),
        "{first_line}"
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("train_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["steps"], 30);
    assert!(summary["evaluation"]["surrogate_mse"].is_number());
}

#[test]
fn diverging_training_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = wosno(
        dir.path(),
        &[
            "train",
            "--family.kind=constant",
            "--hidden=[4]",
            "--train.steps=200",
            "--train.pool_size=4",
            "--train.points_per_instance=2",
            "--train.trajectories=1",
            "--train.learning_rate=1e9",
            "--train.plateau_factor=1",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("diverged"));
}

#[test]
fn inpaint_writes_pgm_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let w = 24;
    let img = GrayImage::from_fn(w, w, |x, _| x as f64 / (w - 1) as f64).unwrap();
    let mask = GrayImage::from_fn(w, w, |x, y| {
        if (8..16).contains(&x) && (8..16).contains(&y) {
            1.0
        } else {
            0.0
        }
    })
    .unwrap();
    img.write_pgm(
        std::fs::File::create(dir.path().join("img.pgm")).unwrap(),
        "input",
    )
    .unwrap();
    mask.write_pgm(
        std::fs::File::create(dir.path().join("mask.pgm")).unwrap(),
        "mask",
    )
    .unwrap();
    let out = wosno(
        dir.path(),
        &[
            "inpaint",
            "--image=img.pgm",
            "--mask=mask.pgm",
            "--method=harmonic",
            "--walks_per_pixel=64",
            "--reference=img.pgm",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let bytes = std::fs::read(dir.path().join("inpainted.pgm")).unwrap();
    let mut lines = bytes.split(|b| *b == b'\n');
    assert_eq!(lines.next().unwrap(), b"P5");
    assert!(String::from_utf8_lossy(lines.next().unwrap()).starts_with("# wosno "));
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("inpaint_summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["stats"]["masked_pixels"], 64);
    assert!(summary["reference"]["max_abs_error"].as_f64().unwrap() < 0.05);
    // A mask touching the image edge is a usage error.
    let edge = GrayImage::from_fn(w, w, |x, _| if x == 0 { 1.0 } else { 0.0 }).unwrap();
    edge.write_pgm(
        std::fs::File::create(dir.path().join("edge.pgm")).unwrap(),
        "",
    )
    .unwrap();
    let out = wosno(
        dir.path(),
        &["inpaint", "--image=img.pgm", "--mask=edge.pgm"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_reports_inverse_variance_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let out = wosno(
        dir.path(),
        &[
            "bench",
            "--problem.kind=constant",
            "--problem.source=1",
            "--trajectories=[1,16]",
            "--replicas=400",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let (head, body) = header_and_body(&dir.path().join("bench.csv"));
    assert!(head.starts_with("# wosno "));
    let rows = csv_rows(&body);
    assert_eq!(rows.len(), 2);
    let scaled: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!((scaled[1] / scaled[0] - 1.0).abs() < 0.3, "{scaled:?}");
    let summary: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("bench_summary.json")).unwrap(),
    )
    .unwrap();
    assert!((summary["variance_slope"].as_f64().unwrap() + 1.0).abs() < 0.15);
}
