use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use qacoustic::config::RunConfig;
use qacoustic::experiments;

#[derive(Parser, Debug)]
#[command(name = "qacoustic", version, about = "Electron wavepackets in a thermal acoustic lattice: stochastic and mean-field ensembles, noise checks and perturbative rates")]
struct Cli {
    /// TOML config file, layered over the preset
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named preset: default or desk
    #[arg(long, global = true, default_value = "default")]
    preset: String,
    /// Master seed (overrides ensemble.master_seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides output.directory and QACOUSTIC_OUT)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (overrides ensemble.max_parallel and QACOUSTIC_THREADS)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fitted momentum relaxation of stochastic and mean-field ensembles against perturbation theory
    RelaxSweep,
    /// Time-averaged spread of both ensembles for each spread material
    SpreadSweep,
    /// Statistical check of the single-mode noise covariance
    NoiseValidate {
        /// Generate with a kernel at twice the mode frequency (negative control)
        #[arg(long)]
        corrupt_kernel: bool,
    },
    /// Perturbative full and mean-field rates over the configured temperatures
    PtBenchmark,
    /// Sampled deformation-field RMS against the disorder integral
    DefpotStats,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::RelaxSweep => "relax-sweep",
            Command::SpreadSweep => "spread-sweep",
            Command::NoiseValidate { .. } => "noise-validate",
            Command::PtBenchmark => "pt-benchmark",
            Command::DefpotStats => "defpot-stats",
        }
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config_hash: String,
    version: &'static str,
    master_seed: u64,
    seeds: Vec<u64>,
    divergent_trajectories: usize,
    wall_time_s: f64,
    outputs: Vec<String>,
    violations: Vec<String>,
}

/// What a command produced: file stem → contents, plus any invariant it
/// found broken.
struct Outcome {
    csv: String,
    json: serde_json::Value,
    seeds: Vec<u64>,
    divergent: usize,
    violations: Vec<String>,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let base = RunConfig::preset(&cli.preset)?;
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            RunConfig::from_toml_over(&base, &text)?
        }
        None => base,
    };
    cfg.apply_env()?;
    if let Some(s) = cli.seed {
        cfg.ensemble.master_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output.directory = o.display().to_string();
    }
    if let Some(t) = cli.threads {
        cfg.ensemble.max_parallel = t;
    }
    cfg.validate_common()?;
    Ok(cfg)
}

fn run(cmd: &Command, cfg: &RunConfig) -> Result<Outcome> {
    let out = match cmd {
        Command::RelaxSweep => {
            let r = experiments::relax_sweep(cfg)?;
            let mut violations = Vec::new();
            if let Some(f) = &r.failure {
                violations.push(format!("sweep aborted: {f}"));
            }
            for row in &r.rows {
                if row.inv_tau_pt_full < row.inv_tau_pt_mf {
                    violations.push(format!("perturbative full rate below mean-field rate at {} K", row.t_k));
                }
            }
            Outcome { csv: r.to_csv(), json: serde_json::to_value(&r)?, seeds: r.seeds.clone(), divergent: r.n_divergent(), violations }
        }
        Command::SpreadSweep => {
            let r = experiments::spread_sweep(cfg)?;
            for (m, dec) in r.high_t_trend() {
                log::info!("{m}: xi_st decreasing above T_D: {dec}");
            }
            let violations = r.failure.iter().map(|f| format!("sweep aborted: {f}")).collect();
            Outcome { csv: r.to_csv(), json: serde_json::to_value(&r)?, seeds: r.seeds.clone(), divergent: r.n_divergent(), violations }
        }
        Command::NoiseValidate { corrupt_kernel } => {
            let r = experiments::noise_validate(cfg, *corrupt_kernel)?;
            let mut violations = Vec::new();
            if !r.passes() {
                violations.push(format!("covariance off by {:.2} error bars (limit {})", r.report.max_sigmas, r.sigmas));
            }
            let seeds = (0..cfg.analysis.noise_realizations).map(|i| qacoustic::simulation::realization_seed(cfg.ensemble.master_seed, i)).collect();
            let json = serde_json::json!({
                "omega_eV": r.omega,
                "dt_fs": r.dt_fs,
                "kernel": format!("{:?}", r.kernel),
                "realizations": r.report.n_realizations,
                "max_abs_deviation": r.report.max_abs_deviation,
                "max_sigmas": r.report.max_sigmas,
                "threshold_sigmas": r.sigmas,
                "pass": r.passes(),
            });
            Outcome { csv: r.to_csv(), json, seeds, divergent: 0, violations }
        }
        Command::PtBenchmark => {
            let r = experiments::pt_benchmark(cfg)?;
            let mut violations = Vec::new();
            if !r.sweep.full_dominates {
                violations.push("full rate below mean-field rate at some temperature".into());
            }
            Outcome { csv: r.to_csv(), json: serde_json::to_value(&r.sweep)?, seeds: Vec::new(), divergent: 0, violations }
        }
        Command::DefpotStats => {
            let r = experiments::defpot_stats(cfg)?;
            Outcome { csv: r.to_csv(), json: serde_json::to_value(&r)?, seeds: Vec::new(), divergent: 0, violations: Vec::new() }
        }
    };
    Ok(out)
}

/// Write to a sibling temp file, then rename over the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match real_main(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    if cfg.ensemble.max_parallel > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cfg.ensemble.max_parallel).build_global().context("starting worker pool")?;
    }
    let dir = PathBuf::from(&cfg.output.directory);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = cli.command.name();
    let started = Instant::now();
    let outcome = run(&cli.command, &cfg)?;
    let hash = cfg.hash();

    let mut outputs = Vec::new();
    write_atomic(&dir.join("config.toml"), format!("# config_hash={hash}\n{}", cfg.to_toml()).as_bytes())?;
    outputs.push("config.toml".to_string());
    if cfg.output.formats.iter().any(|f| f == "csv") {
        let file = format!("{name}.csv");
        write_atomic(&dir.join(&file), outcome.csv.as_bytes())?;
        outputs.push(file);
    }
    if cfg.output.formats.iter().any(|f| f == "json") {
        let file = format!("{name}.json");
        let doc = serde_json::json!({ "config_hash": hash, "result": outcome.json });
        write_atomic(&dir.join(&file), serde_json::to_string_pretty(&doc)?.as_bytes())?;
        outputs.push(file);
    }
    for v in &outcome.violations {
        log::error!("{v}");
    }
    let manifest = RunManifest {
        command: name,
        config_hash: hash,
        version: env!("CARGO_PKG_VERSION"),
        master_seed: cfg.ensemble.master_seed,
        seeds: outcome.seeds,
        divergent_trajectories: outcome.divergent,
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs,
        violations: outcome.violations.clone(),
    };
    write_atomic(&dir.join(format!("{name}.manifest.json")), serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    log::info!("{name} finished in {:.1} s, outputs in {}", manifest.wall_time_s, dir.display());
    Ok(outcome.violations.is_empty())
}
