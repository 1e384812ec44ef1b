//! The `uwacr` command line.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use uwacr::agent::{train_with, Checkpoint};
use uwacr::chanmodel::ArrivalFile;
use uwacr::Agent;

use crate::config::{BenchConfig, PolicyId};
use crate::curves::write_training_curves;
use crate::sinr_check::{sinr_check, write_sinr_check};
use crate::sweep::{calibrate_all, run_sweep, write_calibrations, write_metrics, write_paired};

/// The sweep had no episodes to run, so its table is empty.
pub const EXIT_EMPTY: i32 = 3;
/// A check ran but its tolerance was not met.
pub const EXIT_CHECK_FAILED: i32 = 4;

pub const SINR_TOLERANCE: f64 = 0.05;

#[derive(Debug, Parser)]
#[command(name = "uwacr", version, about = "Underwater acoustic cognitive-radio spectrum sensing and allocation lab")]
pub struct Cli {
    /// Experiment file (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides both `agent.seed` and `bench.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the actor-critic agent; writes checkpoint.json and training_curves.csv.
    Train,
    /// Run the SNR sweep; writes metrics.csv, paired.csv and calibration.csv.
    Eval {
        /// Agent checkpoint; defaults to `bench.checkpoint`, then `<out>/checkpoint.json`.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Calibrate the epsilon back-off of every epsilon policy at every SNR point.
    CalibrateEps,
    /// Parse an arrival file and tabulate its arrivals.
    ParseArr { file: PathBuf },
    /// Compare closed-form and Monte-Carlo SINR on a small asynchronous scene.
    SinrCheck {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I: IntoIterator<Item = T>, T: Into<OsString> + Clone>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn resolve_config(cli: &Cli) -> Result<BenchConfig> {
    let mut cfg = match &cli.config {
        Some(path) => BenchConfig::load(path)?,
        None => BenchConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.agent.seed = seed;
        cfg.bench.seed = seed;
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot write {}", path.display()))?))
}

pub fn run(cli: &Cli) -> Result<i32> {
    let cfg = resolve_config(cli)?;
    fs::create_dir_all(&cli.out).with_context(|| format!("cannot create output directory {}", cli.out.display()))?;
    let fp = cfg.fingerprint();
    fs::write(cli.out.join("config.toml"), cfg.to_toml()).with_context(|| format!("cannot write into {}", cli.out.display()))?;
    match &cli.command {
        Command::Train => train_cmd(&cfg, &cli.out, &fp),
        Command::Eval { checkpoint } => eval_cmd(&cfg, &cli.out, checkpoint.as_deref(), &fp),
        Command::CalibrateEps => {
            let rows = calibrate_all(&cfg)?;
            for r in &rows {
                println!("{} @ {} dB: eps = {:.4}, success = {:.3}", r.policy, r.snr_db, r.calibration.epsilon, r.calibration.success);
            }
            write_calibrations(create(&cli.out.join("calibration.csv"))?, &rows, &fp)?;
            Ok(0)
        }
        Command::ParseArr { file } => parse_arr_cmd(file, &cli.out, &fp),
        Command::SinrCheck { trials } => {
            let check = sinr_check(cfg.bench.seed, *trials)?;
            write_sinr_check(create(&cli.out.join("sinr_check.csv"))?, &check, &fp)?;
            let worst = check.max_rel_error();
            println!("gaps {:?}, {} trials, max relative error {:.4}", check.gaps, check.trials, worst);
            if worst > SINR_TOLERANCE {
                eprintln!("max relative error {worst:.4} exceeds {SINR_TOLERANCE}");
                return Ok(EXIT_CHECK_FAILED);
            }
            Ok(0)
        }
    }
}

fn train_cmd(cfg: &BenchConfig, out: &Path, fp: &str) -> Result<i32> {
    let total = cfg.agent.episodes;
    let every = (total / 20).max(cfg.agent.episodes_per_update);
    let result = train_with::<f64, _>(&cfg.env(), &cfg.agent, |log, _| {
        if log.len() % every < cfg.agent.episodes_per_update {
            let recent = &log[log.len().saturating_sub(every)..];
            let mean = recent.iter().map(|e| e.reward).sum::<f64>() / recent.len() as f64;
            eprintln!("episode {}/{total}: mean reward {mean:.3}", log.len());
        }
    })?;
    result.agent.checkpoint().save(&out.join("checkpoint.json"))?;
    write_training_curves(create(&out.join("training_curves.csv"))?, &result.log, cfg.bench.curve_window, fp)?;
    println!("trained {} episodes ({:?}); checkpoint in {}", result.log.len(), result.stop, out.display());
    Ok(0)
}

fn eval_cmd(cfg: &BenchConfig, out: &Path, checkpoint: Option<&Path>, fp: &str) -> Result<i32> {
    if cfg.bench.episodes == 0 {
        write_metrics(create(&out.join("metrics.csv"))?, &[], fp)?;
        eprintln!("bench.episodes is 0: nothing evaluated, metrics table is empty");
        return Ok(EXIT_EMPTY);
    }
    let agent = if cfg.bench.policies.contains(&PolicyId::Agent) {
        let default = out.join("checkpoint.json");
        let path = checkpoint.or(cfg.bench.checkpoint.as_deref()).unwrap_or(&default);
        if !path.exists() {
            bail!("agent checkpoint {} not found; run `uwacr train` first or pass --checkpoint", path.display());
        }
        Some(Agent::from_checkpoint(&Checkpoint::load(path)?)?)
    } else {
        None
    };
    let result = run_sweep(cfg, agent.as_ref())?;
    write_metrics(create(&out.join("metrics.csv"))?, &result.rows, fp)?;
    write_paired(create(&out.join("paired.csv"))?, &result.paired, fp)?;
    write_calibrations(create(&out.join("calibration.csv"))?, &result.calibrations, fp)?;
    for r in &result.rows {
        println!(
            "{:<16} {:>5} dB  SE {:.3} ± {:.3}  success {:.3} ± {:.3}",
            r.policy, r.snr_db, r.se.mean, r.se.half_width, r.success.mean, r.success.half_width
        );
    }
    Ok(0)
}

fn parse_arr_cmd(file: &Path, out: &Path, fp: &str) -> Result<i32> {
    let text = fs::read_to_string(file).with_context(|| format!("cannot read arrival file {}", file.display()))?;
    let parsed = ArrivalFile::parse(&text).with_context(|| format!("{}", file.display()))?;
    let mut w = csv::Writer::from_writer(create(&out.join("arrivals.csv"))?);
    w.write_record([
        "source",
        "receiver",
        "arrival",
        "amplitude",
        "phase_deg",
        "delay",
        "surface_bounces",
        "bottom_bounces",
        "config_sha256",
    ])?;
    let mut count = 0usize;
    for (s, block) in parsed.sources.iter().enumerate() {
        for (r, arrivals) in block.receivers.iter().enumerate() {
            for (i, a) in arrivals.iter().enumerate() {
                w.write_record([
                    s.to_string(),
                    r.to_string(),
                    i.to_string(),
                    a.amplitude.to_string(),
                    a.phase_deg.to_string(),
                    a.delay.to_string(),
                    a.surface_bounces.to_string(),
                    a.bottom_bounces.to_string(),
                    fp.to_string(),
                ])?;
                count += 1;
            }
        }
    }
    w.flush()?;
    println!(
        "{}: {} Hz, {} source(s), {} receiver(s), {count} arrivals",
        file.display(),
        parsed.frequency,
        parsed.sources.len(),
        parsed.sources.first().map_or(0, |b| b.receivers.len())
    );
    Ok(0)
}
