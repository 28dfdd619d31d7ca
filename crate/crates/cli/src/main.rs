//! `gpukalc`: predict CUDA kernel time, power and energy from PTX.

mod output;
mod setup;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gpukalc::arch::{builtin_names, builtin_profile, load_profile};
use gpukalc::fit::{
    default_peakwarp_epsilon, detect_peakwarps, fit_exponential, fit_linear, fit_piecewise_linear,
    generate_microbench, MeasurementSeries, MicrobenchKind,
};
use gpukalc::pfea::{extract_features, features_to_csv};
use gpukalc::pipeline::{predict, PipelineError};
use gpukalc::power::load_ensemble;
use gpukalc::ptx::{parse_ptx_with, OpcodeTable, ParseOptions};
use gpukalc::sched::{trace_csv, LaunchConfig, ScheduleMode};
use gpukalc::{Ensemble, Profile};

/// Directory searched for `<name>.json` profiles before the built-in set.
const PROFILE_DIR_ENV: &str = "GPUKALC_PROFILE_DIR";

#[derive(Parser)]
#[command(name = "gpukalc", version, about = "Static time, power and energy prediction for CUDA kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a profile from a directory of microbenchmark measurement CSVs.
    Setup(SetupArgs),
    /// Predict time, power and energy for one or more launch configurations.
    Predict(PredictArgs),
    /// Emit the feature CSV consumed by the trainer.
    Features(FeatureArgs),
    /// Write microbenchmark CUDA sources.
    GenMicrobench(GenArgs),
    /// Fit one model to a single `x,y` measurement CSV.
    Fit(FitArgs),
}

#[derive(Args)]
struct SetupArgs {
    /// Directory holding the measurement CSVs.
    #[arg(long)]
    measurements: PathBuf,
    /// Profile whose unfitted fields are kept.
    #[arg(long, default_value = "k20")]
    profile: String,
    /// Name stored in the emitted profile.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct LaunchArgs {
    /// Built-in profile name or path to a profile JSON.
    #[arg(long)]
    profile: String,
    #[arg(long)]
    ptx: PathBuf,
    /// Entry name, plain or mangled.
    #[arg(long)]
    kernel: String,
    /// Blocks per launch; a comma list runs every combination with --tpb.
    #[arg(long, required = true, value_delimiter = ',')]
    blocks: Vec<u64>,
    /// Threads per block.
    #[arg(long, required = true, value_delimiter = ',')]
    tpb: Vec<u64>,
    /// Iteration count for a loop header label, as NAME=K. Repeatable.
    #[arg(long = "loops", value_parser = parse_loop)]
    loops: Vec<(String, u64)>,
    /// Registers per thread.
    #[arg(long, default_value_t = 0)]
    regs: u32,
    /// Shared memory bytes per block.
    #[arg(long, default_value_t = 0)]
    shmem: u64,
    /// Opcode classification table overriding the shipped one.
    #[arg(long)]
    opcodes: Option<PathBuf>,
    /// Drop the per-unit issue gap from block scheduling.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    launch: LaunchArgs,
    /// Power model ensemble JSON.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Features listed in the importance report.
    #[arg(long, default_value_t = 5)]
    top_k: usize,
    /// Write the schedule trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct FeatureArgs {
    #[command(flatten)]
    launch: LaunchArgs,
    /// Measured mean power per configuration; adds the label column.
    #[arg(long, value_delimiter = ',')]
    labels: Option<Vec<f64>>,
}

#[derive(Args)]
struct GenArgs {
    /// compute_throughput:N, latency, pointer_chase_global,
    /// pointer_chase_shared, empty_launch or all.
    #[arg(long, required = true)]
    kind: Vec<String>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    model: FitModel,
    /// CSV with header `x,y`.
    #[arg(long)]
    csv: PathBuf,
    /// Segment count for the piecewise model.
    #[arg(long, default_value_t = setup::LATENCY_SEGMENTS)]
    segments: usize,
    /// Peakwarp tolerance in throughput units; defaults to 2% of the peak.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitModel {
    Linear,
    Piecewise,
    Exponential,
    Peakwarps,
}

fn parse_loop(s: &str) -> Result<(String, u64), String> {
    let (name, k) = s.split_once('=').ok_or_else(|| format!("expected NAME=K, got `{s}`"))?;
    let k = k.trim().parse().map_err(|_| format!("`{k}` is not a loop count"))?;
    if name.trim().is_empty() {
        return Err("loop label is empty".into());
    }
    Ok((name.trim().to_string(), k))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Setup(a) => cmd_setup(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Features(a) => cmd_features(a),
        Command::GenMicrobench(a) => cmd_gen(a),
        Command::Fit(a) => cmd_fit(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gpukalc: {}", render_chain(&e));
            ExitCode::FAILURE
        }
    }
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn render_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !prev.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        prev = msg;
    }
    out
}

/// A path that exists wins, then `<name>.json` under the profile directory,
/// then the built-in set.
fn resolve_profile(spec: &str) -> Result<Profile> {
    let direct = Path::new(spec);
    if direct.is_file() {
        return load_profile(direct).with_context(|| format!("profile {spec}"));
    }
    if let Some(dir) = std::env::var_os(PROFILE_DIR_ENV) {
        let p = Path::new(&dir).join(format!("{spec}.json"));
        if p.is_file() {
            return load_profile(&p).with_context(|| format!("profile {}", p.display()));
        }
    }
    builtin_profile(spec).map_err(|_| {
        anyhow!(
            "profile `{spec}` is neither a file, in ${PROFILE_DIR_ENV}, nor built in ({})",
            builtin_names().collect::<Vec<_>>().join(", ")
        )
    })
}

struct Loaded {
    profile: Profile,
    kernel: gpukalc::ptx::KernelGraph,
    configs: Vec<LaunchConfig>,
    mode: ScheduleMode,
}

fn load_launch(a: &LaunchArgs) -> Result<Loaded> {
    let profile = resolve_profile(&a.profile)?;
    let text = std::fs::read_to_string(&a.ptx).with_context(|| format!("reading {}", a.ptx.display()))?;
    let table = a
        .opcodes
        .as_deref()
        .map(OpcodeTable::load)
        .transpose()
        .map_err(|e| anyhow!("parse: {e}"))?;
    let opts = ParseOptions {
        table: table.as_ref(),
        ..ParseOptions::default()
    };
    let kernel = parse_ptx_with(&text, &a.kernel, opts).map_err(PipelineError::from)?;
    let loops: BTreeMap<&str, u64> = a.loops.iter().map(|(n, k)| (n.as_str(), *k)).collect();
    let mut configs = Vec::new();
    for &nb in &a.blocks {
        for &nt in &a.tpb {
            let mut lc = LaunchConfig::new(nb, nt).with_resources(a.regs, a.shmem);
            for (name, &k) in &loops {
                lc = lc.with_loop(name, k);
            }
            configs.push(lc);
        }
    }
    let mode = if a.strict { ScheduleMode::Strict } else { ScheduleMode::Profile };
    Ok(Loaded {
        profile,
        kernel,
        configs,
        mode,
    })
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let l = load_launch(&a.launch)?;
    let model: Option<Ensemble> = a
        .model
        .as_deref()
        .map(load_ensemble)
        .transpose()
        .map_err(|e| anyhow!("power: {e}"))?;
    let mut out = Vec::with_capacity(l.configs.len());
    for lc in &l.configs {
        let p = predict(&l.profile, &l.kernel, lc, l.mode, model.as_ref(), a.top_k)
            .with_context(|| format!("nB={} nT_b={}", lc.n_blocks, lc.threads_per_block))?;
        if let Some(path) = &a.trace {
            let path = trace_path(path, lc, l.configs.len());
            std::fs::write(&path, trace_csv(&p.schedule.trace))
                .with_context(|| format!("writing {}", path.display()))?;
        }
        out.push(p);
    }
    let reports: Vec<_> = out.iter().map(|p| &p.report).collect();
    let text = match a.format {
        Format::Text => output::text(&reports),
        Format::Json => output::json(&reports),
        Format::Csv => output::csv(&reports),
    };
    print!("{text}");
    Ok(())
}

/// One trace file per configuration when several are requested.
fn trace_path(base: &Path, lc: &LaunchConfig, n_configs: usize) -> PathBuf {
    if n_configs == 1 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}.{}x{}.{ext}", lc.n_blocks, lc.threads_per_block))
}

fn cmd_features(a: FeatureArgs) -> Result<()> {
    let l = load_launch(&a.launch)?;
    if let Some(labels) = &a.labels {
        if labels.len() != l.configs.len() {
            bail!("{} labels given for {} configurations", labels.len(), l.configs.len());
        }
    }
    let rows = l
        .configs
        .iter()
        .map(|lc| extract_features(&l.profile, &l.kernel, lc).map_err(PipelineError::from))
        .collect::<Result<Vec<_>, _>>()?;
    let text = features_to_csv(&rows, a.labels.as_deref()).map_err(|e| anyhow!("features: {e}"))?;
    print!("{text}");
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let kinds: Vec<MicrobenchKind> = if a.kind.iter().any(|k| k == "all") {
        MicrobenchKind::ALL.to_vec()
    } else {
        a.kind.iter().map(|k| k.parse()).collect::<Result<_, _>>()?
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for kind in kinds {
        let path = a.out.join(kind.file_name());
        std::fs::write(&path, generate_microbench(kind)?).with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn cmd_setup(a: SetupArgs) -> Result<()> {
    let base = resolve_profile(&a.profile)?;
    let (mut profile, summary) = setup::calibrate(base, &a.measurements)?;
    if let Some(name) = a.name {
        profile.name = name;
    }
    let mut json = profile.to_json();
    json.push('\n');
    std::fs::write(&a.out, json).with_context(|| format!("writing {}", a.out.display()))?;
    for s in summary {
        eprintln!("{}: R^2 = {:.6}", s.series, s.r2);
    }
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let s = MeasurementSeries::<f64>::load_csv(&a.csv).with_context(|| a.csv.display().to_string())?;
    let value = match a.model {
        FitModel::Linear => {
            let f = fit_linear(&s)?;
            serde_json::json!({ "model": f.model, "r2": f.r2, "rmse": f.rmse })
        }
        FitModel::Piecewise => {
            let f = fit_piecewise_linear(&s, a.segments)?;
            serde_json::json!({ "model": f.model, "r2": f.r2, "rss": f.rss })
        }
        FitModel::Exponential => {
            let f = fit_exponential(&s)?;
            serde_json::json!({
                "model": f.model, "r2": f.r2, "rmse": f.rmse,
                "converged": f.converged, "iterations": f.iterations,
            })
        }
        FitModel::Peakwarps => {
            let eps = a.epsilon.unwrap_or_else(|| default_peakwarp_epsilon(&s));
            serde_json::json!({ "peakwarps": detect_peakwarps(&s, eps)?, "epsilon": eps })
        }
    };
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}
