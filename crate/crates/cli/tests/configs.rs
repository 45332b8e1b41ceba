//! The checked-in example configs parse and build.

use std::path::PathBuf;

use wosno_cli::bench::BenchConfig;
use wosno_cli::config::load_file;
use wosno_cli::greens_check::GreensCheckConfig;
use wosno_cli::inpaint::InpaintConfig;
use wosno_cli::problem::build_solver;
use wosno_cli::solve::SolveConfig;
use wosno_cli::train::TrainCmdConfig;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

#[test]
fn solve_configs_build() {
    for name in ["solve_disk.json", "solve_ball.json", "solve_vc.json"] {
        let cfg: SolveConfig = load_file(Some(&config(name)), &[]).unwrap();
        let solver = build_solver(&cfg.problem, &cfg.domain, &cfg.walk, cfg.run.seed).unwrap();
        assert!(
            !solver.points(&cfg.points, cfg.run.seed).unwrap().is_empty(),
            "{name}"
        );
    }
}

#[test]
fn other_configs_parse() {
    let train: TrainCmdConfig = load_file(Some(&config("train_linear.json")), &[]).unwrap();
    assert_eq!(train.resolved_train().unwrap().seed, 9);
    let _: InpaintConfig = load_file(Some(&config("inpaint.json")), &[]).unwrap();
    let _: GreensCheckConfig = load_file(Some(&config("greens_check.json")), &[]).unwrap();
    let _: BenchConfig = load_file(Some(&config("bench.json")), &[]).unwrap();
}
