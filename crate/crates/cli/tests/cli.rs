//! End-to-end tests of the `earndist` binary: subcommand artifacts, fit
//! caching, CSV-input fidelity, support strictness and seed plumbing.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_earndist")
}

fn run_args(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Two-year synthetic configuration writing into `dir`/out.
fn dgp_config(dir: &Path, seed: u64, c0: f64, c1: f64, n: usize, functionals: &str) -> String {
    let out = dir.join("out");
    format!(
        r#"
seed = {seed}

[estimation]
base_year = 0
functionals = {functionals}
y_points = 150

[bootstrap]
reps = 4

[output]
dir = "{out}"

[[dgp.years]]
year = 0
n = {n}
x_levels = [0.0, 1.0]
x_probs = [0.55, 0.45]
z_levels = [0.0, 1.0]
z_probs = [0.5, 0.5]
g = {{ form = "exp", a = 2.0, b = 0.3, sigma = 0.4, scale = 1.0 }}
k = {{ scale = 600.0, c = {c0}, d = 0.3, f = 0.4, s = 1.0 }}
copula = {{ kind = "gaussian", rho = 0.4 }}
e_marginal = {{ dist = "std_normal" }}

[[dgp.years]]
year = 1
n = {n}
x_levels = [0.0, 1.0]
x_probs = [0.45, 0.55]
z_levels = [0.0, 1.0]
z_probs = [0.5, 0.5]
g = {{ form = "exp", a = 2.3, b = 0.4, sigma = 0.4, scale = 1.0 }}
k = {{ scale = 650.0, c = {c1}, d = 0.3, f = 0.4, s = 1.0 }}
copula = {{ kind = "gaussian", rho = 0.4 }}
e_marginal = {{ dist = "std_normal" }}
"#,
        out = out.display(),
    )
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn decompose_emits_telescoping_series_and_cdf_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "run.toml",
        &dgp_config(tmp.path(), 31, 0.9, 1.1, 1800, r#"["q50", "mean"]"#),
    );
    let out = run_args(&["decompose", "--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let out_dir = tmp.path().join("out");
    for f in ["series_all_q50.csv", "series_all_mean.csv", "manifest.json"] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
    for slug in ["q0_r0_s0_p0", "q1_r0_s0_p0", "q1_r1_s0_p0", "q1_r1_s1_p0", "q1_r1_s1_p1"] {
        assert!(out_dir.join(format!("cdf_{slug}.csv")).is_file());
    }
    for f in ["series_all_q50.csv", "series_all_mean.csv"] {
        for row in read_rows(&out_dir.join(f)) {
            let num = |i: usize| row[i].parse::<f64>().unwrap();
            let (base, comparison) = (num(2), num(3));
            let terms: Vec<f64> = (4..9).map(num).collect();
            let total = terms[4];
            assert!(
                (terms[0] + terms[1] + terms[2] + terms[3] - total).abs() < 1e-10,
                "{f}: terms do not telescope"
            );
            assert!(
                (comparison - base - total).abs() < 1e-9,
                "{f}: total does not match endpoint difference"
            );
        }
    }
}

#[test]
fn fit_cache_is_shared_across_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "run.toml",
        &dgp_config(tmp.path(), 33, 0.9, 1.1, 1500, r#"["mean"]"#),
    );
    let c = config.to_str().unwrap();
    let first = run_args(&["fit", "--config", c]);
    assert!(first.status.success(), "stderr: {}", stderr_of(&first));
    assert!(stderr_of(&first).contains("cache miss"));
    let second = run_args(&["decompose", "--config", c]);
    assert!(second.status.success(), "stderr: {}", stderr_of(&second));
    assert!(stderr_of(&second).contains("cache hit"), "stderr: {}", stderr_of(&second));

    let series = std::fs::read(tmp.path().join("out/series_all_mean.csv")).unwrap();
    let third = run_args(&["decompose", "--config", c]);
    assert!(third.status.success());
    assert!(stderr_of(&third).contains("cache hit"));
    let series_again = std::fs::read(tmp.path().join("out/series_all_mean.csv")).unwrap();
    assert_eq!(series, series_again, "cached rerun changed output bytes");
}

#[test]
fn csv_input_reproduces_synthetic_run_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let dgp_dir = tmp.path().join("a");
    std::fs::create_dir_all(&dgp_dir).unwrap();
    let dgp_cfg = write_config(
        &dgp_dir,
        "run.toml",
        &dgp_config(&dgp_dir, 35, 0.9, 1.1, 1500, r#"["q50", "mean"]"#),
    );
    let c = dgp_cfg.to_str().unwrap();
    assert!(run_args(&["simulate", "--config", c]).status.success());
    assert!(run_args(&["decompose", "--config", c]).status.success());

    // Same estimation settings, but reading the simulated file back in.
    let csv_dir = tmp.path().join("b");
    std::fs::create_dir_all(&csv_dir).unwrap();
    let csv_out = csv_dir.join("out");
    let csv_cfg = write_config(
        &csv_dir,
        "run.toml",
        &format!(
            r#"
seed = 35

[input]
path = "{data}"
wage = "wage"
x = ["x0"]
z = ["z0"]
weekly_hours = "weekly_hours"
weeks = "weeks"
weight = "weight"

[estimation]
base_year = 0
functionals = ["q50", "mean"]
y_points = 150

[output]
dir = "{out}"
"#,
            data = dgp_dir.join("out/simulated.csv").display(),
            out = csv_out.display(),
        ),
    );
    let out = run_args(&["decompose", "--config", csv_cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    for f in ["series_all_q50.csv", "series_all_mean.csv", "cdf_q1_r1_s1_p1.csv"] {
        let a = std::fs::read(dgp_dir.join("out").join(f)).unwrap();
        let b = std::fs::read(csv_out.join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between synthetic and CSV-input runs");
    }
}

#[test]
fn strict_support_turns_overlap_gaps_into_errors() {
    let tmp = tempfile::tempdir().unwrap();
    // A large participation shift leaves year-1 low-rank worker cells
    // uncovered by year 0's wage structure.
    let config = write_config(
        tmp.path(),
        "run.toml",
        &dgp_config(tmp.path(), 37, 0.0, 1.4, 2000, r#"["mean"]"#),
    );
    let c = config.to_str().unwrap();
    let lenient = run_args(&["decompose", "--config", c]);
    assert!(lenient.status.success(), "stderr: {}", stderr_of(&lenient));
    let manifest = std::fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap();
    assert!(manifest.contains("support:"), "expected support warnings in manifest");

    let strict = run_args(&["decompose", "--config", c, "--strict-support"]);
    assert!(!strict.status.success());
    let record = std::fs::read_to_string(tmp.path().join("out/error.json")).unwrap();
    assert!(record.contains("support_violation"), "record: {record}");

    // A later successful run clears the stale error record.
    assert!(run_args(&["decompose", "--config", c]).status.success());
    assert!(!tmp.path().join("out/error.json").exists());
}

#[test]
fn print_config_documents_defaults_and_is_reusable() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "run.toml",
        &dgp_config(tmp.path(), 39, 0.9, 1.1, 300, r#"["mean"]"#),
    );
    let out = run_args(&["decompose", "--config", config.to_str().unwrap(), "--print-config"]);
    assert!(out.status.success());
    let printed = String::from_utf8(out.stdout).unwrap();
    for line in [
        "trim_quantile = 0.99",
        "hours_points = 400",
        "wage_points = 300",
        "control_function = \"interval\"",
        "allow_zero_quantiles = false",
        "level = 0.95",
        "cdf_dumps = true",
    ] {
        assert!(printed.contains(line), "missing {line:?} in printed config");
    }
    // No run artifacts are produced by --print-config.
    assert!(!tmp.path().join("out").exists());

    let reread = write_config(tmp.path(), "effective.toml", &printed);
    let again = run_args(&["decompose", "--config", reread.to_str().unwrap(), "--print-config"]);
    assert!(again.status.success());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), printed);
}

#[test]
fn seed_override_changes_estimates_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "run.toml",
        &dgp_config(tmp.path(), 41, 0.9, 1.1, 1200, r#"["mean"]"#),
    );
    let c = config.to_str().unwrap();
    assert!(run_args(&["decompose", "--config", c]).status.success());
    let base = std::fs::read(tmp.path().join("out/series_all_mean.csv")).unwrap();
    let over = run_args(&["decompose", "--config", c, "--seed", "42"]);
    assert!(over.status.success(), "stderr: {}", stderr_of(&over));
    assert!(stderr_of(&over).contains("cache miss"), "new seed must invalidate the cache");
    let changed = std::fs::read(tmp.path().join("out/series_all_mean.csv")).unwrap();
    assert_ne!(base, changed, "different seed produced identical data and estimates");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["master_seed"], 42);
    assert_eq!(manifest["command"], "decompose");
}

#[test]
fn invalid_configuration_fails_before_producing_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "run.toml",
        &dgp_config(tmp.path(), 43, 0.9, 1.1, 300, r#"["median"]"#),
    );
    let out = run_args(&["decompose", "--config", config.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("functional"), "stderr: {}", stderr_of(&out));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn bootstrap_bands_bracket_the_decompose_point_estimates() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "run.toml",
        &dgp_config(tmp.path(), 45, 0.9, 1.1, 1200, r#"["mean"]"#),
    );
    let c = config.to_str().unwrap();
    assert!(run_args(&["decompose", "--config", c]).status.success());
    let series = read_rows(&tmp.path().join("out/series_all_mean.csv"));
    let out = run_args(&["bootstrap", "--config", c]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    let bands = read_rows(&tmp.path().join("out/bootstrap_all_mean.csv"));
    assert_eq!(bands.len(), 5);
    for (ti, row) in bands.iter().enumerate() {
        let point: f64 = row[2].parse().unwrap();
        let lower: f64 = row[3].parse().unwrap();
        let upper: f64 = row[4].parse().unwrap();
        assert!(lower <= upper, "term {ti}: interval inverted");
        // The bootstrap's own point estimate equals the decompose output.
        let series_point: f64 = series[0][4 + ti].parse().unwrap();
        assert_eq!(point, series_point, "term {ti}: point estimates diverge");
    }
}
