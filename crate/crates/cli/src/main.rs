//! `tilecache` experiment runner.
//!
//! Exit codes: 0 success, 2 usage error, 3 configuration or input error,
//! 4 I/O error.

mod output;
mod report;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use tilecache::cache::PolicyKind;
use tilecache::fovcast::{evaluate_predictors, write_accuracy_csv, HarnessParams, PredictorKind};
use tilecache::sim::{self, SimulationConfig, SweepAxis, SweepSpec};
use tilecache::trace::{write_traces, GenerateSection};

#[derive(Parser, Debug)]
#[command(name = "tilecache", version, about = "Tile caching simulator for live 360-degree video")]
struct Cli {
    /// Output directory.
    #[arg(long, short, global = true, env = "TILECACHE_OUT", default_value = "results")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// Simulation config (TOML); defaults apply to anything left out.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. `--set cache.capacity_frac=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic head-trace cohort.
    GenTraces {
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run one simulation.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        policy: Option<PolicyKind>,
        #[arg(long)]
        predictor: Option<PredictorKind>,
        /// Capacity as a fraction of the normalizing size.
        #[arg(long)]
        capacity: Option<f64>,
        #[arg(long)]
        td_scale: Option<f64>,
    },
    /// Run a cross product of policies, axis values and seeds.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        axis: SweepAxis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        policy: Vec<PolicyKind>,
        /// Defaults to the config seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Skip writing per-run logs.
        #[arg(long)]
        no_logs: bool,
    },
    /// Score predictors against the ground-truth viewports.
    PredictEval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_delimiter = ',', default_values = ["tlp", "colpb", "colp-long"])]
        predictor: Vec<PredictorKind>,
        /// Horizons in seconds.
        #[arg(long, value_delimiter = ',', default_values = ["3", "4", "5", "6", "7", "8", "9", "10"])]
        horizons: Vec<u32>,
        /// Evaluate every n-th segment.
        #[arg(long, default_value_t = 1)]
        stride: u32,
    },
    /// Rebuild tables and plot series from the run logs in a results directory.
    Report {
        /// Defaults to the output directory.
        dir: Option<PathBuf>,
        /// Also render SVG line charts.
        #[arg(long)]
        svg: bool,
    },
}

fn load_config(args: &ConfigArgs) -> Result<SimulationConfig> {
    let base = match &args.config {
        Some(p) => SimulationConfig::read(p)?,
        None => SimulationConfig::default(),
    };
    let mut cfg = base.with_overrides(&args.overrides)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn gen_traces(out: &Path, args: &ConfigArgs) -> Result<()> {
    let cfg = load_config(args)?;
    let traces = sim::load_cohort(&cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join("traces.csv");
    let generate = cfg.cohort.trace_path.is_none().then_some(GenerateSection {
        n_viewers: cfg.cohort.n_viewers,
        duration_s: cfg.cohort.duration_s,
        correlation: cfg.cohort.correlation,
        seed: cfg.seed,
    });
    write_traces(&path, &traces, &cfg.grid, generate)?;
    println!("wrote {} viewers to {}", traces.len(), path.display());
    Ok(())
}

fn simulate(out: &Path, cfg: SimulationConfig) -> Result<()> {
    cfg.validate()?;
    let result = sim::run(&cfg)?;
    let dir = output::write_run(out, &cfg, &result)?;
    output::write_metrics(out, std::slice::from_ref(&result.report))?;
    let r = &result.report.all;
    println!(
        "{}: backhaul_reduction={:.4} cost_per_user_usd={:.6} transcode_bytes={} interest_hit_ratio={:.4} -> {}",
        cfg.cache.policy,
        r.backhaul_reduction,
        r.cost_per_user_usd,
        r.transcode_bytes,
        r.interest_hit_ratio,
        dir.display()
    );
    Ok(())
}

fn sweep(out: &Path, template: SimulationConfig, spec: SweepSpec) -> Result<()> {
    let points = sim::sweep(&template, &spec)?;
    if spec.keep_logs {
        for p in &points {
            output::write_run(out, &p.config, &p.output)?;
        }
    }
    let reports: Vec<_> = points.into_iter().map(|p| p.output.report).collect();
    output::write_metrics(out, &reports)?;
    println!("{} runs -> {}", reports.len(), out.join(output::METRICS_FILE).display());
    Ok(())
}

fn predict_eval(out: &Path, args: &ConfigArgs, predictors: &[PredictorKind], horizons: Vec<u32>, stride: u32) -> Result<()> {
    let cfg = load_config(args)?;
    let ctx = sim::build_context(&cfg, sim::load_cohort(&cfg)?)?;
    let params = HarnessParams {
        horizons_s: horizons,
        stride,
        exec: cfg.run.exec,
    };
    let rows: Vec<_> = predictors
        .iter()
        .flat_map(|&k| evaluate_predictors(&ctx, k, &params))
        .collect();
    std::fs::create_dir_all(out)?;
    let path = out.join("accuracy.csv");
    write_accuracy_csv(&path, &rows)?;
    for r in &rows {
        println!("{:>10} {:>5.1}s overlap={:.4} l2={:.4}", r.predictor, r.horizon_s, r.overlap_ratio, r.l2_loss);
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let out = cli.out;
    match cli.command {
        Command::GenTraces { cfg } => gen_traces(&out, &cfg),
        Command::Simulate {
            cfg,
            policy,
            predictor,
            capacity,
            td_scale,
        } => {
            let mut c = load_config(&cfg)?;
            if let Some(p) = policy {
                c.cache.policy = p;
            }
            if let Some(p) = predictor {
                c.prediction.predictor = p;
            }
            if let Some(x) = capacity {
                c.cache.capacity_frac = x;
            }
            if let Some(x) = td_scale {
                c.cost.td_scale = x;
            }
            simulate(&out, c)
        }
        Command::Sweep {
            cfg,
            axis,
            values,
            policy,
            seeds,
            no_logs,
        } => {
            let template = load_config(&cfg)?;
            let seeds = if seeds.is_empty() { vec![template.seed] } else { seeds };
            let spec = SweepSpec {
                axis,
                values,
                policies: policy,
                seeds,
                keep_logs: !no_logs,
            };
            sweep(&out, template, spec)
        }
        Command::PredictEval {
            cfg,
            predictor,
            horizons,
            stride,
        } => predict_eval(&out, &cfg, &predictor, horizons, stride),
        Command::Report { dir, svg } => {
            let dir = dir.unwrap_or(out);
            let summary = report::build(&dir)?;
            report::write(&dir, &summary, svg)?;
            println!("{} runs -> {}", summary.runs.len(), dir.join(report::REPORT_DIR).display());
            Ok(())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<tilecache::Error>() {
            return match e {
                tilecache::Error::Io(_) => 4,
                tilecache::Error::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => 4,
                _ => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
