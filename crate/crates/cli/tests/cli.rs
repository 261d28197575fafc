use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 5

[cohort]
n_viewers = 6
duration_s = 12.0

[fov]
samples_per_axis = 6

[run]
d_max_s = 6.0
warmup_s = 3.0
exec = "sequential"
"#;

fn tilecache(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tilecache"))
        .env_remove("TILECACHE_OUT")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("c.toml");
    fs::write(&path, SMALL).unwrap();
    path.to_string_lossy().into_owned()
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = tilecache(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn simulate_writes_report_and_run_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = tilecache(dir.path(), &["simulate", "--config", &cfg, "--policy", "coffee"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = dir.path().join("metrics.csv");
    let text = fs::read_to_string(&metrics).unwrap();
    assert!(text.starts_with(
        "policy,predictor,capacity_frac,td_scale,seed,backhaul_reduction,cost_per_user_usd,transcode_bytes,interest_hit_ratio\n"
    ));
    assert_eq!(rows(&metrics).len(), 1);
    let run = dir.path().join("runs/coffee_colp-long_c0.4_td1_s5");
    for f in ["config.toml", "access_log.csv", "interest_log.csv", "ledger.csv", "metrics.csv"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    assert!(dir.path().join("metrics_warm.csv").is_file());
}

#[test]
fn config_and_io_errors_have_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[cache]\nno_such_key = 1\n").unwrap();
    let out = tilecache(dir.path(), &["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    let cfg = small_config(dir.path());
    let out = tilecache(dir.path(), &["simulate", "--config", &cfg, "--set", "cohort.correlation=3"]);
    assert_eq!(out.status.code(), Some(3));

    let out = tilecache(dir.path(), &["simulate", "--config", "/nonexistent/c.toml"]);
    assert_eq!(out.status.code(), Some(4));

    // the output directory is a regular file
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let out = tilecache(&blocker, &["simulate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn sweep_rows_are_the_cross_product_and_report_recomputes_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = tilecache(
        dir.path(),
        &[
            "sweep", "--config", &cfg, "--axis", "capacity", "--values", "0.1,0.3,0.6", "--policy", "coffee,lru-live",
            "--seeds", "1,2",
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = rows(&dir.path().join("metrics.csv"));
    assert_eq!(metrics.len(), 3 * 2 * 2);

    let out = tilecache(dir.path(), &["report", "--svg"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = dir.path().join("report");
    let mut summary = rows(&report.join("summary.csv"));
    let mut original = metrics.clone();
    let key = |r: &csv::StringRecord| (r[0].to_string(), r[2].to_string(), r[4].to_string());
    summary.sort_by_key(key);
    original.sort_by_key(key);
    assert_eq!(summary.len(), original.len());
    for (a, b) in summary.iter().zip(&original) {
        assert_eq!(key(a), key(b));
        for col in 5..9 {
            let (x, y): (f64, f64) = (a[col].parse().unwrap(), b[col].parse().unwrap());
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "column {col}: {x} vs {y}");
        }
    }

    // Coffee's reduction does not fall with capacity on these seeds
    let curve = rows(&report.join("reduction_vs_capacity.csv"));
    let coffee: Vec<f64> = curve.iter().filter(|r| &r[0] == "coffee").map(|r| r[5].parse().unwrap()).collect();
    assert_eq!(coffee.len(), 3);
    assert!(coffee.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{coffee:?}");
    for f in [
        "cost_vs_td.csv",
        "transcode_vs_td.csv",
        "cost_vs_time.csv",
        "group_hit_ratios.csv",
        "interest_hit_series.csv",
        "reduction_vs_capacity.svg",
        "cost_vs_time.svg",
    ] {
        assert!(report.join(f).is_file(), "{f}");
    }
}

#[test]
fn report_on_empty_directory_writes_empty_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = tilecache(dir.path(), &["report"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("report/summary.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(rows(&dir.path().join("report/reduction_vs_capacity.csv")).is_empty());
}

#[test]
fn single_run_report_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    assert!(tilecache(dir.path(), &["simulate", "--config", &cfg, "--policy", "trans-coffee"]).status.success());
    assert!(tilecache(dir.path(), &["report"]).status.success());
    assert_eq!(rows(&dir.path().join("report/summary.csv")).len(), 1);
}

#[test]
fn generated_traces_replay_like_the_synthetic_cohort() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = tilecache(dir.path(), &["gen-traces", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let traces = dir.path().join("traces.csv");
    assert!(traces.is_file());
    assert!(dir.path().join("traces.cohort.toml").is_file());

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(tilecache(&a, &["simulate", "--config", &cfg]).status.success());
    let set = format!("cohort.trace_path={}", traces.display());
    let out = tilecache(&b, &["simulate", "--config", &cfg, "--set", &set]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (ra, rb) = (rows(&a.join("metrics.csv")), rows(&b.join("metrics.csv")));
    // the CSV keeps poses to full precision, so the replay matches
    assert_eq!(ra[0].iter().skip(5).collect::<Vec<_>>(), rb[0].iter().skip(5).collect::<Vec<_>>());
}

#[test]
fn predict_eval_and_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let target = dir.path().join("from_env");
    let out = Command::new(env!("CARGO_BIN_EXE_tilecache"))
        .env("TILECACHE_OUT", &target)
        .args(["predict-eval", "--config", &cfg, "--predictor", "tlp,truth", "--horizons", "3,4"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let acc = rows(&target.join("accuracy.csv"));
    assert_eq!(acc.len(), 4);
    let truth: Vec<_> = acc.iter().filter(|r| &r[0] == "truth").collect();
    assert!(truth.iter().all(|r| &r[2] == "1.0" || &r[2] == "1"));
}
