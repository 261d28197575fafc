//! Figure tables rebuilt from the per-run logs.
//!
//! Nothing here reads the metrics files: every number comes from a run's
//! `config.toml` plus its access and interest logs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};

use tilecache::sim::{
    interest_hit_ratio, read_access_log, read_interest_log, summarize, write_metrics_csv, MetricsReport,
    SimulationConfig,
};

use crate::output::{write_atomic, ACCESS_LOG_FILE, CONFIG_FILE, INTEREST_LOG_FILE, RUNS_DIR};
use crate::svg::{LineChart, Series};

pub const REPORT_DIR: &str = "report";

pub struct RunSummary {
    pub name: String,
    pub report: MetricsReport,
    /// Cumulative dollars per viewer at the end of each step.
    pub cost_series: Vec<(u32, f64)>,
    pub interest_series: Vec<(u32, f64)>,
}

pub struct Summary {
    pub runs: Vec<RunSummary>,
}

fn summarize_run(dir: &Path) -> Result<RunSummary> {
    let config = SimulationConfig::read(&dir.join(CONFIG_FILE))?;
    let log = read_access_log(fs::File::open(dir.join(ACCESS_LOG_FILE))?)
        .with_context(|| format!("reading {}", dir.join(ACCESS_LOG_FILE).display()))?;
    let interest = read_interest_log(fs::File::open(dir.join(INTEREST_LOG_FILE))?)
        .with_context(|| format!("reading {}", dir.join(INTEREST_LOG_FILE).display()))?;
    let report = summarize(&config, config.prediction.predictor, &log, &interest);

    let cost = config.cost_model();
    let viewers = report.viewers.max(1) as f64;
    let mut per_step: BTreeMap<u32, f64> = BTreeMap::new();
    for r in log.iter().filter(|r| config.cache.base_layer_in_metrics || r.row >= 0) {
        let d = cost.download_usd(r.bytes_origin as f64) + r.transcode_level.map_or(0.0, |k| cost.transcode_usd(k));
        *per_step.entry(r.t).or_default() += d;
    }
    let mut acc = 0.0;
    let cost_series = per_step
        .into_iter()
        .map(|(t, d)| {
            acc += d;
            (t, acc / viewers)
        })
        .collect();
    Ok(RunSummary {
        name: dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        report,
        cost_series,
        interest_series: interest_hit_ratio(&interest).1,
    })
}

/// Reads every finished run under `dir/runs`. A missing directory is an
/// empty result, not an error.
pub fn build(dir: &Path) -> Result<Summary> {
    let runs_dir = dir.join(RUNS_DIR);
    let mut runs = Vec::new();
    if runs_dir.is_dir() {
        let mut dirs: Vec<_> = fs::read_dir(&runs_dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| !n.to_string_lossy().starts_with('.')))
            .collect();
        dirs.sort();
        for d in dirs {
            runs.push(summarize_run(&d)?);
        }
    }
    Ok(Summary { runs })
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Seed-averaged metric per (policy, predictor, fixed value, x).
type Curve = BTreeMap<(String, String, Key, Key), (f64, usize)>;

fn curve(runs: &[RunSummary], fixed: impl Fn(&RunSummary) -> f64, x: impl Fn(&RunSummary) -> f64, y: impl Fn(&RunSummary) -> f64) -> Curve {
    let mut out = Curve::new();
    for r in runs {
        let key = (
            r.report.policy.to_string(),
            r.report.predictor.to_string(),
            Key(fixed(r)),
            Key(x(r)),
        );
        let e = out.entry(key).or_insert((0.0, 0));
        e.0 += y(r);
        e.1 += 1;
    }
    out
}

fn write_curve(path: &Path, header: [&str; 6], c: &Curve) -> Result<()> {
    write_atomic(path, |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(header)?;
        for ((policy, predictor, fixed, x), (sum, n)) in c {
            w.write_record([
                policy.clone(),
                predictor.clone(),
                fixed.0.to_string(),
                x.0.to_string(),
                n.to_string(),
                (sum / *n as f64).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

fn chart_from_curve(title: &str, x_label: &str, y_label: &str, c: &Curve) -> LineChart {
    let mut lines: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for ((policy, predictor, fixed, x), (sum, n)) in c {
        lines
            .entry(format!("{policy} {predictor} {}", fixed.0))
            .or_default()
            .push((x.0, sum / *n as f64));
    }
    LineChart {
        title: title.into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        series: lines.into_iter().map(|(name, points)| Series { name, points }).collect(),
    }
}

fn write_series(path: &Path, value: &str, runs: &[RunSummary], pick: impl Fn(&RunSummary) -> &[(u32, f64)]) -> Result<()> {
    write_atomic(path, |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["run", "policy", "t", value])?;
        for r in runs {
            for (t, v) in pick(r) {
                w.write_record([r.name.clone(), r.report.policy.to_string(), t.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    })
}

fn series_chart(title: &str, y_label: &str, runs: &[RunSummary], pick: impl Fn(&RunSummary) -> &[(u32, f64)]) -> LineChart {
    LineChart {
        title: title.into(),
        x_label: "t (GoP steps)".into(),
        y_label: y_label.into(),
        series: runs
            .iter()
            .map(|r| Series {
                name: r.name.clone(),
                points: pick(r).iter().map(|(t, v)| (f64::from(*t), *v)).collect(),
            })
            .collect(),
    }
}

/// Writes every table under `dir/report`, and SVG charts when asked.
pub fn write(dir: &Path, s: &Summary, svg: bool) -> Result<()> {
    let out = dir.join(REPORT_DIR);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let runs = &s.runs;
    let reports: Vec<MetricsReport> = runs.iter().map(|r| r.report.clone()).collect();
    write_atomic(&out.join("summary.csv"), |f| Ok(write_metrics_csv(f, &reports, false)?))?;
    write_atomic(&out.join("summary_warm.csv"), |f| Ok(write_metrics_csv(f, &reports, true)?))?;

    let reduction = curve(runs, |r| r.report.td_scale, |r| r.report.capacity_frac, |r| r.report.all.backhaul_reduction);
    let cost_td = curve(runs, |r| r.report.capacity_frac, |r| r.report.td_scale, |r| r.report.all.cost_per_user_usd);
    let trans_td = curve(runs, |r| r.report.capacity_frac, |r| r.report.td_scale, |r| r.report.all.transcode_bytes as f64);
    write_curve(
        &out.join("reduction_vs_capacity.csv"),
        ["policy", "predictor", "td_scale", "capacity_frac", "runs", "backhaul_reduction"],
        &reduction,
    )?;
    write_curve(
        &out.join("cost_vs_td.csv"),
        ["policy", "predictor", "capacity_frac", "td_scale", "runs", "cost_per_user_usd"],
        &cost_td,
    )?;
    write_curve(
        &out.join("transcode_vs_td.csv"),
        ["policy", "predictor", "capacity_frac", "td_scale", "runs", "transcode_bytes"],
        &trans_td,
    )?;
    write_series(&out.join("cost_vs_time.csv"), "cost_per_user_usd", runs, |r| &r.cost_series)?;
    write_series(&out.join("interest_hit_series.csv"), "interest_hit_ratio", runs, |r| &r.interest_series)?;
    write_atomic(&out.join("group_hit_ratios.csv"), |f| {
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["run", "policy", "capacity_frac", "seed", "group", "hit_ratio"])?;
        for r in runs {
            for (g, v) in r.report.group_hit_ratios.iter().enumerate() {
                w.write_record([
                    r.name.clone(),
                    r.report.policy.to_string(),
                    r.report.capacity_frac.to_string(),
                    r.report.seed.to_string(),
                    g.to_string(),
                    v.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;

    if svg {
        let charts = [
            ("reduction_vs_capacity.svg", chart_from_curve("Backhaul reduction", "capacity fraction", "reduction", &reduction)),
            ("cost_vs_td.svg", chart_from_curve("Cost per user", "T/D ratio", "USD", &cost_td)),
            ("transcode_vs_td.svg", chart_from_curve("Transcoding traffic", "T/D ratio", "bytes", &trans_td)),
            ("cost_vs_time.svg", series_chart("Cumulative cost per user", "USD", runs, |r| &r.cost_series)),
            (
                "interest_hit_series.svg",
                series_chart("Interest hit byte ratio", "ratio", runs, |r| &r.interest_series),
            ),
        ];
        for (file, chart) in charts {
            write_atomic(&out.join(file), |f| Ok(f.write_all(chart.render().as_bytes())?))?;
        }
    }
    Ok(())
}
