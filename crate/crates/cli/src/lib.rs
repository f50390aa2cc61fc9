//! Command-line driver: configuration, orchestration and CSV/JSON output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use polymer2d::experiments::{run_experiment, ExperimentConfig, ExperimentReport, EXPERIMENTS};

/// Environment variable that overrides `--out`.
pub const OUT_ENV: &str = "POLYMER2D_OUT";
/// Present in the output directory while a run is in progress or after it aborted.
pub const PARTIAL_MARKER: &str = "RUN_INCOMPLETE";
pub const MANIFEST: &str = "manifest.json";
pub const CSV_HEADER: [&str; 7] = ["experiment", "N", "statistic", "estimate", "stderr", "target", "gate"];

#[derive(Debug, Parser)]
#[command(name = "polymer2d", version, about = "Directed polymer experiments in 2+1 dimensions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run experiments and write CSVs plus a manifest.
    Run(RunArgs),
    /// Print the experiment names accepted by `--experiments`.
    ListExperiments,
    /// Print the effective configuration as TOML.
    PrintConfig(ConfigArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct ConfigArgs {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (the POLYMER2D_OUT variable takes precedence).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Size of the worker pool; defaults to the number of cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Comma-separated experiment names; all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub experiments: Vec<String>,
    /// Overwrite an existing output directory.
    #[arg(long)]
    pub force: bool,
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config_str(&text).with_context(|| format!("in {}", path.display()))
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}

pub fn config_to_toml(config: &ExperimentConfig) -> Result<String> {
    Ok(toml::to_string(config)?)
}

/// File, then flags, then the environment.
pub fn effective_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(p) => parse_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out = out.to_string_lossy().into_owned();
    }
    if let Some(out) = std::env::var_os(OUT_ENV) {
        config.out = out.to_string_lossy().into_owned();
    }
    config.validate()?;
    Ok(config)
}

pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let digest = Sha256::digest(config_to_toml(config)?.as_bytes());
    Ok(format!("{digest:x}"))
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(CSV_HEADER)?;
    for row in &report.rows {
        w.write_record([
            row.experiment.to_string(),
            row.n.to_string(),
            row.statistic.clone(),
            real(row.estimate),
            real(row.stderr),
            real(row.target),
            row.gate.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentEntry {
    pub name: String,
    pub csv: PathBuf,
    pub passed: bool,
    pub failed_gates: Vec<String>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub workers: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub wall_seconds: f64,
    pub experiments: Vec<ExperimentEntry>,
    pub passed: bool,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn select_experiments(names: &[String]) -> Result<Vec<&'static str>> {
    if names.is_empty() {
        return Ok(EXPERIMENTS.to_vec());
    }
    names
        .iter()
        .map(|n| match EXPERIMENTS.iter().find(|e| **e == n.trim()) {
            Some(e) => Ok(*e),
            None => bail!("unknown experiment {n:?}; see list-experiments"),
        })
        .collect()
}

fn prepare_out_dir(out: &Path, selected: &[&str], force: bool) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut existing: Vec<PathBuf> = vec![out.join(MANIFEST), out.join(PARTIAL_MARKER)];
    existing.extend(selected.iter().map(|e| out.join(format!("{e}.csv"))));
    existing.retain(|p| p.exists());
    if !existing.is_empty() && !force {
        bail!("{} already holds results ({}); pass --force to overwrite", out.display(), existing[0].display());
    }
    Ok(())
}

/// Run `selected` with `config` on a pool of `workers` threads.
pub fn run(config: &ExperimentConfig, selected: &[&'static str], workers: usize, force: bool) -> Result<RunManifest> {
    config.validate()?;
    let out = PathBuf::from(&config.out);
    prepare_out_dir(&out, selected, force)?;
    let marker = out.join(PARTIAL_MARKER);
    fs::write(&marker, "run in progress or aborted\n")?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let started = unix_now();
    let clock = Instant::now();
    let mut entries = Vec::new();
    for &name in selected {
        let t = Instant::now();
        let report = pool.install(|| run_experiment(name, config)).with_context(|| format!("experiment {name}"))?;
        let csv = out.join(format!("{name}.csv"));
        write_csv(&report, &csv)?;
        let failed_gates: Vec<String> =
            report.rows.iter().filter(|r| r.gate.failed()).map(|r| format!("N={} {}: {}", r.n, r.statistic, r.gate)).collect();
        eprintln!("{name}: {} ({:.1}s)", if report.passed() { "pass" } else { "FAIL" }, t.elapsed().as_secs_f64());
        entries.push(ExperimentEntry {
            name: name.to_string(),
            csv,
            passed: report.passed(),
            failed_gates,
            wall_seconds: t.elapsed().as_secs_f64(),
        });
    }
    let manifest = RunManifest {
        config: config.clone(),
        config_hash: config_hash(config)?,
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        workers,
        started_unix: started,
        finished_unix: unix_now(),
        wall_seconds: clock.elapsed().as_secs_f64(),
        passed: entries.iter().all(|e| e.passed),
        experiments: entries,
    };
    let tmp = out.join(format!("{MANIFEST}.tmp"));
    fs::write(&tmp, serde_json::to_string_pretty(&manifest)?)?;
    fs::rename(&tmp, out.join(MANIFEST))?;
    fs::remove_file(&marker)?;
    Ok(manifest)
}

/// Exit code: 0 when every gate passes, 1 on a gate failure, 2 on usage,
/// configuration or I/O errors.
pub fn execute(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::ListExperiments => {
            for e in EXPERIMENTS {
                println!("{e}");
            }
            Ok(0)
        }
        Command::PrintConfig(args) => effective_config(&args).and_then(|c| config_to_toml(&c)).map(|s| {
            print!("{s}");
            0
        }),
        Command::Run(args) => (|| {
            let config = effective_config(&args.config)?;
            let selected = select_experiments(&args.experiments)?;
            let workers = args.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            if workers == 0 {
                bail!("--workers must be positive");
            }
            let manifest = run(&config, &selected, workers, args.force)?;
            Ok(if manifest.passed { 0 } else { 1 })
        })(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
