//! End-to-end runs of the command-line tool.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_krylov-cd");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn run_config(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn sorted_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn lanczos_and_agp_write_tables_with_provenance() {
    let out = TempDir::new().unwrap();
    let config = configs().join("stirap.toml");
    let text = fs::read_to_string(&config).unwrap();
    let hash = krylov_cd::runner::output::config_hash(&text);

    for command in ["lanczos", "agp"] {
        let result = run_config(command, &config, out.path(), &[]);
        assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    }
    let files = sorted_files(out.path());
    let names: Vec<_> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for expected in [
        "stirap_lanczos_b.csv",
        "stirap_lanczos.json",
        "stirap_agp_alpha.csv",
        "stirap_agp_terms.csv",
        "stirap_agp_totals.csv",
    ] {
        assert!(names.iter().any(|n| n == expected), "missing {expected} in {names:?}");
    }
    for path in &files {
        let body = fs::read_to_string(path).unwrap();
        assert!(body.contains(&hash), "{} lacks the config hash", path.display());
        assert!(body.contains(env!("CARGO_PKG_VERSION")), "{} lacks the version", path.display());
    }

    // d = 7 away from the midpoint: rows 0..6 for every point.
    let b = fs::read_to_string(out.path().join("stirap_lanczos_b.csv")).unwrap();
    let rows: Vec<_> = b.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.first().unwrap().split(',').count(), 5);
    assert!(rows.len() >= 101 * 4, "{} rows", rows.len());
}

#[test]
fn json_format_carries_the_tables() {
    let out = TempDir::new().unwrap();
    let result = run_config("agp", &configs().join("profiles.toml"), out.path(), &["--format", "json"]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let files = sorted_files(out.path());
    assert_eq!(files.len(), 1, "{files:?}");
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
    let alpha = &value["tables"]["alpha"];
    assert!(alpha["header"].is_array());
    assert!(!alpha["rows"].as_array().unwrap().is_empty());
}

#[test]
fn reruns_are_byte_identical() {
    let config = configs().join("xx_random.toml");
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        let result = run_config("agp", &config, dir.path(), &["--jobs", "2"]);
        assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    }
    let (fa, fb) = (sorted_files(a.path()), sorted_files(b.path()));
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{} differs", x.display());
    }
}

#[test]
fn seed_on_the_command_line_changes_random_couplings() {
    let config = configs().join("xx_random.toml");
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert!(run_config("lanczos", &config, a.path(), &[]).status.success());
    assert!(run_config("lanczos", &config, b.path(), &["--seed", "5"]).status.success());
    let read = |d: &TempDir| fs::read_to_string(d.path().join("xx_random_lanczos_b.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
}

#[test]
fn unknown_keys_are_reported_with_their_line() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        "name = \"bad\"\n\n[model.stirap]\ndetuning = 1.0\npeak = 4.0\nt_final = 10.0\nwidht = 0.2\n",
    );
    let result = run_config("lanczos", &config, dir.path(), &[]);
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("widht"), "{stderr}");
    assert!(stderr.contains("line 7"), "{stderr}");
}

#[test]
fn random_couplings_without_a_seed_are_rejected() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        "name = \"x\"\n[model.xx_anneal]\nn_sites = 4\nv0 = 1.0\nh0 = 2.0\nt_final = 10.0\ncouplings = { kind = \"random\" }\n",
    );
    let result = run_config("lanczos", &config, dir.path(), &[]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("seed"));
    assert!(run_config("lanczos", &config, dir.path(), &["--seed", "3"]).status.success());
}

#[test]
fn evolve_reports_fidelities() {
    let out = TempDir::new().unwrap();
    let result = run_config("evolve", &configs().join("two_level_exact.toml"), out.path(), &[]);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let table = fs::read_to_string(out.path().join("two_level_exact_evolve_fidelity.csv")).unwrap();
    let mut lines = table.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(lines.next().unwrap(), "t_f,f_none,f_exact");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    for row in &rows {
        assert!((row[2] - 1.0).abs() < 1e-6, "exact CD fidelity {row:?}");
    }
    assert!(rows[0][1] < 0.1 && rows[4][1] > 0.9, "bare fidelities {rows:?}");
}

#[test]
fn verify_passes_and_catches_a_perturbed_chain() {
    let ok = run(&["verify", "--check", "1", "--check", "4"]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let stdout = String::from_utf8_lossy(&ok.stdout);
    assert_eq!(stdout.lines().filter(|l| l.contains("PASS")).count(), 2, "{stdout}");

    let broken = run(&["verify", "--check", "4", "--perturb-b", "1e-3"]);
    assert!(!broken.status.success());
    assert!(String::from_utf8_lossy(&broken.stdout).contains("FAIL"));
}
