use std::path::Path;
use std::process::{Command, Output};

use seeded_ising::io::{csv_body, read_template, write_template, CsvTable};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seeded-ising"))
        .args(args)
        .output()
        .expect("run seeded-ising")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, count: &str) -> Vec<String> {
    let d = dir.to_str().unwrap();
    ok(&[
        "--rows", "8", "--cols", "32", "--rng-seed", "3", "--out", d, "synthesize", "--count",
        count, "--steps", "3000",
    ]);
    let n: usize = count.parse().unwrap();
    (0..n).map(|i| format!("{d}/s{i:04}_00.tpl")).collect()
}

fn table(path: &Path) -> CsvTable {
    CsvTable::read(path).unwrap()
}

#[test]
fn synthesize_is_deterministic_and_replayable() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(&tmp.path().join("a"), "3");
    let b = synth(&tmp.path().join("b"), "3");
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    assert_ne!(std::fs::read(&a[0]).unwrap(), std::fs::read(&a[1]).unwrap());

    let manifest = tmp.path().join("a/synthesize.csv");
    let replay = tmp.path().join("replay");
    ok(&[
        "--config",
        manifest.to_str().unwrap(),
        "--out",
        replay.to_str().unwrap(),
        "synthesize",
    ]);
    assert_eq!(
        std::fs::read(&a[2]).unwrap(),
        std::fs::read(replay.join("s0002_00.tpl")).unwrap()
    );
}

#[test]
fn different_rng_seeds_differ() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(&tmp.path().join("a"), "1");
    let d = tmp.path().join("b");
    ok(&[
        "--rows", "8", "--cols", "32", "--rng-seed", "4", "--out", d.to_str().unwrap(),
        "synthesize", "--count", "1", "--steps", "3000",
    ]);
    assert_ne!(
        std::fs::read(&a[0]).unwrap(),
        std::fs::read(d.join("s0000_00.tpl")).unwrap()
    );
}

#[test]
fn outputs_are_not_overwritten_without_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("a");
    synth(&dir, "1");
    let args = [
        "--rows", "8", "--cols", "32", "--out", dir.to_str().unwrap(), "synthesize", "--count", "1",
    ];
    let out = run(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    let mut forced = args.to_vec();
    forced.insert(0, "--overwrite");
    ok(&forced);
}

#[test]
fn match_with_itself_and_rotated_copy() {
    let tmp = tempfile::tempdir().unwrap();
    let files = synth(&tmp.path().join("t"), "1");
    let rotated = tmp.path().join("t/s0000_01.tpl");
    let original = read_template(&files[0]).unwrap();
    write_template(&original.rotate_columns(3), &rotated, false).unwrap();

    let plain = tmp.path().join("plain");
    ok(&[
        "--out", plain.to_str().unwrap(), "match", &files[0], "--against", &files[0], "--paired",
    ]);
    let t = table(&plain.join("match.csv"));
    assert_eq!(t.f64_column("distance").unwrap(), vec![0.0]);

    let rot = tmp.path().join("rot");
    ok(&[
        "--out", rot.to_str().unwrap(), "--rotation", "--max-shift", "4", "match", &files[0],
        rotated.to_str().unwrap(),
    ]);
    let t = table(&rot.join("match.csv"));
    assert_eq!(t.f64_column("distance").unwrap(), vec![0.0]);
    assert_eq!(t.f64_column("shift").unwrap(), vec![3.0]);
    let label = t.column("label").unwrap();
    assert_eq!(t.rows[0][label], "genuine");

    let norot = tmp.path().join("norot");
    ok(&["--out", norot.to_str().unwrap(), "match", &files[0], rotated.to_str().unwrap()]);
    let d = table(&norot.join("match.csv")).f64_column("distance").unwrap();
    assert!(d[0] > 0.0);
}

#[test]
fn reconstruct_reports_expected_seed_size() {
    let tmp = tempfile::tempdir().unwrap();
    let files = synth(&tmp.path().join("t"), "2");
    let out = tmp.path().join("rec");
    let stdout = ok(&[
        "--rows", "8", "--cols", "32", "--out", out.to_str().unwrap(), "--seed-fraction", "1/6",
        "--trials", "4", "--schedule", "200x5", "reconstruct", &files[0], &files[1],
    ]);
    assert!(stdout.contains("seed bits      86"), "{stdout}");
    let t = table(&out.join("reconstruct.csv"));
    assert_eq!(t.rows.len(), 8);
    let streams = t.f64_column("stream").unwrap();
    assert_eq!(streams, (0..8).map(f64::from).collect::<Vec<_>>());
    assert!(out.join("reconstruct_summary.csv").exists());
    assert!(out.join("reconstruct_match_rate.csv").exists());
}

#[test]
fn seed_count_is_exact_and_full_seed_reproduces_original() {
    let tmp = tempfile::tempdir().unwrap();
    let files = synth(&tmp.path().join("t"), "1");
    let out = tmp.path().join("full");
    ok(&[
        "--out", out.to_str().unwrap(), "--seed-count", "256", "--trials", "2", "--schedule",
        "10x2", "reconstruct", &files[0],
    ]);
    let t = table(&out.join("reconstruct.csv"));
    assert_eq!(t.f64_column("reconstructed_distance").unwrap(), vec![0.0, 0.0]);
    assert_eq!(t.f64_column("initial_distance").unwrap(), vec![0.0, 0.0]);
}

#[test]
fn sweep_singleton_grid_has_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let files = synth(&tmp.path().join("t"), "1");
    let out = tmp.path().join("sweep");
    let stdout = ok(&[
        "--out", out.to_str().unwrap(), "--trials", "1", "--schedule", "100x3", "sweep-j",
        &files[0], "--jv-values", "0.2", "--jh-values", "0.3",
    ]);
    assert!(stdout.contains("J = (0.2, 0.3)"), "{stdout}");
    let t = table(&out.join("sweep_j.csv"));
    assert_eq!(t.rows.len(), 1);
    assert_eq!(t.f64_column("std").unwrap(), vec![0.0]);
}

#[test]
fn dof_fits_and_rejects_constant_column() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d.csv");
    let mut t = CsvTable::new(&["distance", "flat"]);
    for i in 0..200 {
        t.push(vec![format!("{}", 0.45 + 0.001 * (i % 20) as f64), "0.5".into()]);
    }
    t.write(&data, false).unwrap();
    let out = tmp.path().join("dof");
    let stdout = ok(&["--out", out.to_str().unwrap(), "dof", data.to_str().unwrap()]);
    assert!(stdout.starts_with("p = 0.4595"), "{stdout}");
    let body = csv_body(&std::fs::read_to_string(out.join("dof.csv")).unwrap());
    assert!(body.starts_with("bin_lo,bin_hi,count,empirical_density,fitted_density\n"));

    let flat = run(&[
        "--out", tmp.path().join("flat").to_str().unwrap(), "dof", data.to_str().unwrap(),
        "--column", "flat",
    ]);
    assert_eq!(flat.status.code(), Some(1));
    let missing = run(&[
        "--out", tmp.path().join("m").to_str().unwrap(), "dof", data.to_str().unwrap(),
        "--column", "nope",
    ]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn oracle_check_runs_small() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let stdout = ok(&[
        "--out", out.to_str().unwrap(), "oracle-check", "--burn-in", "1000", "--samples", "50000",
    ]);
    assert!(stdout.starts_with("free bits 7"), "{stdout}");
    let t = table(&out.join("oracle_check.csv"));
    assert_eq!(t.rows.len(), 128);
    let exact: f64 = t.f64_column("exact").unwrap().iter().sum();
    assert!((exact - 1.0).abs() < 1e-9);
}

#[test]
fn invalid_arguments_fail() {
    for args in [
        vec!["--cols", "2", "synthesize"],
        vec!["--seed-fraction", "3/2", "reconstruct", "x.tpl"],
        vec!["--schedule", "5,5", "synthesize"],
        vec!["reconstruct"],
        vec!["reconstruct", "/nonexistent/file.tpl"],
        vec!["--config", "/nonexistent.json", "synthesize"],
    ] {
        let out = run(&args);
        assert!(!out.status.success(), "{args:?} should fail");
    }
}
