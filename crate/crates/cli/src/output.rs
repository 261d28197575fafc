//! Result files. Each run directory is staged under a temporary name and
//! renamed into place, so a partially written run is never visible.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use tilecache::sim::{write_access_log, write_interest_log, write_metrics_csv, MetricsReport, RunOutput, SimulationConfig};

pub const RUNS_DIR: &str = "runs";
pub const METRICS_FILE: &str = "metrics.csv";
pub const METRICS_WARM_FILE: &str = "metrics_warm.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const ACCESS_LOG_FILE: &str = "access_log.csv";
pub const INTEREST_LOG_FILE: &str = "interest_log.csv";
pub const LEDGER_FILE: &str = "ledger.csv";

pub fn run_name(cfg: &SimulationConfig) -> String {
    format!(
        "{}_{}_c{}_td{}_s{}",
        cfg.cache.policy, cfg.prediction.predictor, cfg.cache.capacity_frac, cfg.cost.td_scale, cfg.seed
    )
}

/// Writes `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<()> {
    let tmp = path.with_extension(format!("tmp-{}", std::process::id()));
    let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    fill(&mut f)?;
    f.sync_all()?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

/// Writes one run's config, logs, ledger series and metrics row.
pub fn write_run(out: &Path, cfg: &SimulationConfig, result: &RunOutput) -> Result<PathBuf> {
    let runs = out.join(RUNS_DIR);
    fs::create_dir_all(&runs).with_context(|| format!("creating {}", runs.display()))?;
    let name = run_name(cfg);
    let staged = runs.join(format!(".{name}.tmp-{}", std::process::id()));
    let fin = runs.join(&name);
    if staged.exists() {
        fs::remove_dir_all(&staged)?;
    }
    fs::create_dir(&staged)?;

    cfg.write(&staged.join(CONFIG_FILE))?;
    write_access_log(fs::File::create(staged.join(ACCESS_LOG_FILE))?, &result.log)?;
    write_interest_log(fs::File::create(staged.join(INTEREST_LOG_FILE))?, &result.interest)?;
    let mut w = csv::Writer::from_path(staged.join(LEDGER_FILE))?;
    for s in &result.ledger.series {
        w.serialize(s)?;
    }
    w.flush()?;
    write_metrics_csv(fs::File::create(staged.join(METRICS_FILE))?, std::slice::from_ref(&result.report), false)?;

    if fin.exists() {
        fs::remove_dir_all(&fin).with_context(|| format!("replacing {}", fin.display()))?;
    }
    fs::rename(&staged, &fin).with_context(|| format!("publishing {}", fin.display()))?;
    Ok(fin)
}

/// Writes the metrics table with and without the warm-up span.
pub fn write_metrics(out: &Path, reports: &[MetricsReport]) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_atomic(&out.join(METRICS_FILE), |f| Ok(write_metrics_csv(f, reports, false)?))?;
    write_atomic(&out.join(METRICS_WARM_FILE), |f| Ok(write_metrics_csv(f, reports, true)?))?;
    Ok(())
}
