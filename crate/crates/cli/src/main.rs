//! Command line front end: validate configs, run single simulations or
//! baselines, sweep parameters across seeds, and summarize metrics files.
//!
//! Exit codes: 0 success, 2 configuration problems, 3 runtime failures.

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sporesim::checkpoint;
use sporesim::config::{presets, ExperimentConfig, Task};
use sporesim::harness::{self, RunMode, RunOptions, RunResult};
use sporesim::metrics::parse_stream;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "sporesim", version, about = "Closed-loop spiking-network learning simulator")]
struct Cli {
    /// Log progress while running (repeat for debug detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config file and print its digest.
    Validate {
        /// Path to a TOML config.
        #[arg(long)]
        config: PathBuf,
    },
    /// Print a ready-made config as TOML.
    Defaults {
        /// Which preset: reaching, reaching-small, lane, or paper.
        #[arg(long, default_value = "reaching")]
        preset: String,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one learning simulation.
    Run(RunArgs),
    /// Run the random-policy baseline for a config.
    Baseline(RunArgs),
    /// Run a grid of prior strengths across seeds, with baselines.
    SweepPrior(SweepPriorArgs),
    /// Run the lane task with and without annealing across seeds.
    SweepAnnealing(SweepAnnealingArgs),
    /// Summarize a metrics file.
    Report {
        /// Path to a metrics JSONL file.
        metrics: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Path to a TOML config; omit to use the task preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Task preset when no config is given: reaching, reaching-small, lane.
    #[arg(long, default_value = "reaching-small")]
    preset: String,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the config's duration, seconds.
    #[arg(long)]
    duration_s: Option<f64>,
    /// Override how many windows each metrics record covers.
    #[arg(long)]
    metrics_every: Option<u32>,
    /// Write metrics JSONL here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for periodic checkpoints.
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
    /// Override seconds between checkpoints.
    #[arg(long)]
    checkpoint_every_s: Option<f64>,
    /// Resume from this checkpoint file.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct SweepPriorArgs {
    /// Path to a TOML config; omit to use the small reaching preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seeds.
    #[arg(long, default_value = "1,2,3,4", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Comma-separated prior strengths to sweep.
    #[arg(long = "c-p", default_value = "0.0,0.25,1.0", value_delimiter = ',')]
    c_p: Vec<f64>,
    /// Override duration, seconds.
    #[arg(long)]
    duration_s: Option<f64>,
    /// Output directory for per-run metrics and the summary.
    #[arg(long)]
    out: PathBuf,
    /// Parallel runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Skip the per-seed random baselines.
    #[arg(long)]
    no_baseline: bool,
}

#[derive(Args)]
struct SweepAnnealingArgs {
    /// Path to a TOML config; omit to use the lane preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated seeds.
    #[arg(long, default_value = "1,2,3,4", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Comma-separated annealing rates to sweep.
    #[arg(long, default_value = "8.5e-5,0.0", value_delimiter = ',')]
    lambdas: Vec<f64>,
    /// Override duration, seconds.
    #[arg(long)]
    duration_s: Option<f64>,
    /// Output directory for per-run metrics and the summary.
    #[arg(long)]
    out: PathBuf,
    /// Parallel runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp_millis()
        .init();

    match cli.command {
        Command::Validate { config } => validate(&config),
        Command::Defaults { preset, out } => defaults(&preset, out.as_deref()),
        Command::Run(args) => single(args, RunMode::Learning),
        Command::Baseline(args) => single(args, RunMode::Baseline),
        Command::SweepPrior(args) => sweep_prior(args),
        Command::SweepAnnealing(args) => sweep_annealing(args),
        Command::Report { metrics } => report(&metrics),
    }
}

fn preset_by_name(name: &str) -> Result<ExperimentConfig, String> {
    match name {
        "reaching" => Ok(presets::reaching()),
        "reaching-small" => Ok(presets::reaching_small()),
        "lane" => Ok(presets::lane()),
        "paper" => Ok(ExperimentConfig::default()),
        other => Err(format!(
            "unknown preset {other}; expected reaching, reaching-small, lane, or paper"
        )),
    }
}

fn validate(path: &Path) -> ExitCode {
    match ExperimentConfig::load(path) {
        Ok(cfg) => {
            println!("ok {}", cfg.hash_hex());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn defaults(preset: &str, out: Option<&Path>) -> ExitCode {
    let cfg = match preset_by_name(preset) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let text = cfg.to_toml_string();
    match out {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("cannot write {}: {e}", path.display());
                return ExitCode::from(EXIT_RUNTIME);
            }
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    ExitCode::SUCCESS
}

fn load_config(args_config: Option<&Path>, preset: &str) -> Result<ExperimentConfig, ExitCode> {
    let cfg = match args_config {
        Some(path) => ExperimentConfig::load(path).map_err(|e| {
            eprintln!("{e}");
            ExitCode::from(EXIT_CONFIG)
        })?,
        None => preset_by_name(preset).map_err(|e| {
            eprintln!("{e}");
            ExitCode::from(EXIT_CONFIG)
        })?,
    };
    Ok(cfg)
}

fn apply_overrides(
    cfg: &mut ExperimentConfig,
    seed: Option<u64>,
    duration_s: Option<f64>,
    metrics_every: Option<u32>,
    checkpoint_every_s: Option<f64>,
) -> Result<(), ExitCode> {
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(d) = duration_s {
        cfg.duration_s = d;
    }
    if let Some(m) = metrics_every {
        cfg.metrics_every = m;
    }
    if let Some(c) = checkpoint_every_s {
        cfg.checkpoint_every_s = c;
    }
    cfg.validate().map_err(|e| {
        eprintln!("{e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn print_result(task: Task, mode: RunMode, seed: u64, res: &RunResult) {
    let mode_name = match mode {
        RunMode::Learning => "learning",
        RunMode::Baseline => "baseline",
    };
    let mut line = format!(
        "{task} {mode_name} seed={seed} windows={} sim-time={:.1}s",
        res.windows, res.duration_s
    );
    match task {
        Task::Reaching => line.push_str(&format!(" reaches={}", res.reaches)),
        Task::Lane => line.push_str(&format!(" resets={}", res.resets)),
    }
    if let Some(w) = res.final_weak_frac {
        line.push_str(&format!(" weak-frac={w:.4}"));
    }
    println!("{line}");
}

fn single(args: RunArgs, mode: RunMode) -> ExitCode {
    let mut cfg = match load_config(args.config.as_deref(), &args.preset) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    if let Err(code) = apply_overrides(
        &mut cfg,
        args.seed,
        args.duration_s,
        args.metrics_every,
        args.checkpoint_every_s,
    ) {
        return code;
    }

    let resume = match args.resume.as_deref() {
        Some(path) => match checkpoint::load(path) {
            Ok(ck) => Some(ck),
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(EXIT_RUNTIME);
            }
        },
        None => None,
    };

    let mut metrics_file = match args.out.as_deref() {
        Some(path) => match std::fs::File::create(path) {
            Ok(f) => Some(BufWriter::new(f)),
            Err(e) => {
                eprintln!("cannot create {}: {e}", path.display());
                return ExitCode::from(EXIT_RUNTIME);
            }
        },
        None => None,
    };
    if let Some(dir) = args.checkpoint_dir.as_deref() {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("cannot create {}: {e}", dir.display());
            return ExitCode::from(EXIT_RUNTIME);
        }
    }

    log::info!(
        "starting {} {:?} seed={} duration={}s",
        cfg.task,
        mode,
        cfg.seed,
        cfg.duration_s
    );
    let start = std::time::Instant::now();
    let opts = RunOptions {
        metrics: metrics_file
            .as_mut()
            .map(|f| f as &mut dyn Write),
        checkpoint_dir: args.checkpoint_dir.as_deref(),
        resume_from: resume.as_ref(),
    };
    let res = match harness::run(&cfg, mode, opts) {
        Ok(res) => res,
        Err(sporesim::harness::RunError::Config(e)) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    if let Some(mut f) = metrics_file {
        if let Err(e) = f.flush() {
            eprintln!("cannot flush metrics: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    log::info!(
        "finished in {:.1}s wall ({:.0} windows/s)",
        start.elapsed().as_secs_f64(),
        res.windows as f64 / start.elapsed().as_secs_f64().max(1e-9)
    );
    print_result(cfg.task, mode, cfg.seed, &res);
    ExitCode::SUCCESS
}

#[derive(Serialize)]
struct SweepRow {
    label: String,
    seed: u64,
    mode: String,
    metrics_path: String,
    windows: u64,
    reaches: usize,
    resets: usize,
    final_weak_frac: Option<f64>,
    mean_reward_last_quarter: f64,
}

fn run_to_row(
    label: &str,
    cfg: &ExperimentConfig,
    mode: RunMode,
    path: &Path,
) -> Result<SweepRow, String> {
    let file = std::fs::File::create(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut buf = BufWriter::new(file);
    let res = harness::run(
        cfg,
        mode,
        RunOptions {
            metrics: Some(&mut buf),
            ..RunOptions::default()
        },
    )
    .map_err(|e| format!("{label} seed {}: {e}", cfg.seed))?;
    buf.flush().map_err(|e| e.to_string())?;
    let quarter = cfg.duration_s * 0.75;
    Ok(SweepRow {
        label: label.to_string(),
        seed: cfg.seed,
        mode: match mode {
            RunMode::Learning => "learning".into(),
            RunMode::Baseline => "baseline".into(),
        },
        metrics_path: path.display().to_string(),
        windows: res.windows,
        reaches: res.reaches,
        resets: res.resets,
        final_weak_frac: res.final_weak_frac,
        mean_reward_last_quarter: res.aggregates.mean_reward_in(quarter, cfg.duration_s),
    })
}

fn run_sweep(
    out_dir: &Path,
    jobs: usize,
    work: Vec<(String, ExperimentConfig, RunMode, PathBuf)>,
) -> ExitCode {
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        eprintln!("cannot create {}: {e}", out_dir.display());
        return ExitCode::from(EXIT_RUNTIME);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot build thread pool: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let results: Vec<Result<SweepRow, String>> = pool.install(|| {
        use rayon::prelude::*;
        work.par_iter()
            .map(|(label, cfg, mode, path)| {
                log::info!("sweep run {label} seed={}", cfg.seed);
                run_to_row(label, cfg, *mode, path)
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(EXIT_RUNTIME);
            }
        }
    }
    let summary_path = out_dir.join("summary.json");
    let json = serde_json::to_string_pretty(&rows).expect("rows serialize");
    if let Err(e) = std::fs::write(&summary_path, json) {
        eprintln!("cannot write {}: {e}", summary_path.display());
        return ExitCode::from(EXIT_RUNTIME);
    }
    for row in &rows {
        println!(
            "{} seed={} {}: windows={} reaches={} resets={} mean-reward-last-quarter={:.4}",
            row.label, row.seed, row.mode, row.windows, row.reaches, row.resets,
            row.mean_reward_last_quarter
        );
    }
    println!("summary {}", summary_path.display());
    ExitCode::SUCCESS
}

fn sweep_prior(args: SweepPriorArgs) -> ExitCode {
    let mut base = match load_config(args.config.as_deref(), "reaching-small") {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    if let Err(code) = apply_overrides(&mut base, None, args.duration_s, None, None) {
        return code;
    }
    let mut work = Vec::new();
    for &c_p in &args.c_p {
        for &seed in &args.seeds {
            let mut cfg = base.clone();
            cfg.plasticity.c_p = c_p;
            cfg.seed = seed;
            if cfg.validate().is_err() {
                eprintln!("invalid sweep point c_p={c_p}");
                return ExitCode::from(EXIT_CONFIG);
            }
            let label = format!("c_p={c_p}");
            let path = args.out.join(format!("run_cp{c_p}_seed{seed}.jsonl"));
            work.push((label, cfg, RunMode::Learning, path));
        }
    }
    if !args.no_baseline {
        for &seed in &args.seeds {
            let mut cfg = base.clone();
            cfg.seed = seed;
            let path = args.out.join(format!("baseline_seed{seed}.jsonl"));
            work.push(("baseline".to_string(), cfg, RunMode::Baseline, path));
        }
    }
    run_sweep(&args.out, args.jobs, work)
}

fn sweep_annealing(args: SweepAnnealingArgs) -> ExitCode {
    let mut base = match load_config(args.config.as_deref(), "lane") {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    if let Err(code) = apply_overrides(&mut base, None, args.duration_s, None, None) {
        return code;
    }
    let mut work = Vec::new();
    for &lambda in &args.lambdas {
        for &seed in &args.seeds {
            let mut cfg = base.clone();
            cfg.plasticity.lambda = lambda;
            cfg.seed = seed;
            if cfg.validate().is_err() {
                eprintln!("invalid sweep point lambda={lambda}");
                return ExitCode::from(EXIT_CONFIG);
            }
            let label = format!("lambda={lambda}");
            let path = args.out.join(format!("run_lambda{lambda}_seed{seed}.jsonl"));
            work.push((label, cfg, RunMode::Learning, path));
        }
    }
    run_sweep(&args.out, args.jobs, work)
}

fn report(path: &Path) -> ExitCode {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read {}: {e}", path.display());
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let parsed = match parse_stream(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cannot parse {}: {e}", path.display());
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    let h = &parsed.header;
    println!(
        "task={} seed={} config={} windows-per-record={}",
        h.task, h.seed, &h.config_hash[..12.min(h.config_hash.len())], h.metrics_every
    );
    let Some(agg) = parsed.aggregates else {
        println!("stream has no aggregate block (run did not finish)");
        return ExitCode::SUCCESS;
    };
    let duration_s = agg.reward_sum.len() as f64 * agg.block_s;
    println!(
        "windows={} events={} duration~{:.0}s",
        agg.windows, agg.events_total, duration_s
    );
    if h.task == "reaching" {
        println!("reaches total={}", agg.reach_times_s.len());
        let mut start = 0.0;
        while start < duration_s {
            let end = (start + 250.0).min(duration_s);
            println!(
                "  {:>6.0}-{:<6.0}s reaches={:<4} mean-reward={:.4}",
                start,
                end,
                agg.reaches_in(start, end),
                agg.mean_reward_in(start, end)
            );
            start = end;
        }
    } else {
        println!("off-track resets total={}", agg.reset_times_s.len());
        let mut start = 0.0;
        while start < duration_s {
            let end = (start + 600.0).min(duration_s);
            println!(
                "  {:>6.0}-{:<6.0}s on-lane={:.3} mean-reward={:.4}",
                start,
                end,
                agg.on_lane_fraction(start, end),
                agg.mean_reward_in(start, end)
            );
            start = end;
        }
    }
    if !agg.snaps.is_empty() {
        println!("plasticity snapshots:");
        for s in &agg.snaps {
            println!(
                "  t={:>7.0}s beta={:.3e} weak-frac={:.4} theta-mean={:.4}",
                s.t, s.beta, s.weak_frac, s.theta_mean
            );
        }
    }
    ExitCode::SUCCESS
}
