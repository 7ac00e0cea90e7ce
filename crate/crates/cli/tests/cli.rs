use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hbplate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbplate")).args(args).output().expect("binary runs")
}

fn smooth_uniform(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["--benchmark", "smooth", "--refine", "uniform", "--max-iter", "3", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    hbplate(&args)
}

#[test]
fn configuration_errors_exit_with_two() {
    for args in [
        &["--benchmark", "smooth", "--bogus"][..],
        &["--benchmark", "nope"],
        &["--benchmark", "smooth", "--degree", "2"],
        &["--benchmark", "smooth", "--gamma", "1.5"],
        &["--benchmark", "smooth", "--dump-mesh"],
        &["--benchmark", "smooth", "--admissibility", "1"],
    ] {
        let out = hbplate(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn uniform_study_writes_one_row_per_iteration() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("smooth.csv");
    let out = smooth_uniform(&csv, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "iteration,dofs,n_elements,h_max,error_h2,eta_total,theta,qoi");
    assert_eq!(lines.len(), 4);
    let dofs: Vec<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(dofs, ["49", "121", "361"]);
    assert!(lines[1].ends_with(",nan"));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("iterations=3"), "{stdout}");
}

#[test]
fn sequential_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["a.csv", "b.csv", "c.csv"].iter().map(|n| dir.path().join(n)).collect();
    assert!(smooth_uniform(&paths[0], &["--seq"]).status.success());
    assert!(smooth_uniform(&paths[1], &["--seq"]).status.success());
    assert!(smooth_uniform(&paths[2], &[]).status.success());
    let a = fs::read(&paths[0]).unwrap();
    assert_eq!(a, fs::read(&paths[1]).unwrap());
    assert_eq!(a, fs::read(&paths[2]).unwrap());
}

#[test]
fn mesh_dumps_follow_the_records_file() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("run.csv");
    let out = hbplate(&[
        "--benchmark",
        "quartic",
        "--refine",
        "adaptive",
        "--max-iter",
        "2",
        "--out",
        csv.to_str().unwrap(),
        "--dump-mesh",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mesh = fs::read_to_string(dir.path().join("run_mesh_000.txt")).unwrap();
    let records = fs::read_to_string(&csv).unwrap();
    let n_elements: usize = records.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(mesh.lines().filter(|l| !l.trim().is_empty()).count(), n_elements);
}
