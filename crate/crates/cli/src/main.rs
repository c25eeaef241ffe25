//! `lel`: experiment harness for the likelihood-encoder library.
//!
//! Exit codes: 0 on success, 1 when the command line or configuration is
//! invalid, 2 when an experiment fails at run time (including enumeration-cap
//! and codebook-size guards).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use lel::codec::Codebook;
use lel::config::{ExperimentConfig, Setup};
use lel::experiments;
use lel::Limits;

#[derive(Parser, Debug)]
#[command(name = "lel", version, about = "Likelihood-encoder and soft-covering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sweep Lagrange slopes and target distortions, emitting (slope, D, R).
    RdCurve(Common),
    /// Soft-covering TV over the n x R sweep.
    SoftCover(Common),
    /// End-to-end likelihood-encoder distortion over the n x R sweep.
    Distortion(Common),
    /// Exact proof-step quantities, per trial codebook or for one codebook file.
    ProofCheck {
        #[command(flatten)]
        common: Common,
        /// Analyze this serialized codebook instead of sampling codebooks.
        #[arg(long, value_name = "PATH")]
        codebook: Option<PathBuf>,
    },
    /// Generate a codebook for the first (n, R) and serialize it.
    Codebook(Common),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output file; falls back to the config's `output`, then stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Overrides `trials`.
    #[arg(long, value_name = "N")]
    trials: Option<usize>,
    /// Worker threads (0 or unset: one per core). Output does not depend on it.
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn report(&self) -> ExitCode {
        let (err, code) = match self {
            Failure::Validation(e) => (e, 1),
            Failure::Runtime(e) => (e, 2),
        };
        eprintln!("error: {err:#}");
        ExitCode::from(code)
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Validation(e.into())
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Runtime(e.into())
}

struct Loaded {
    cfg: ExperimentConfig,
    setup: Setup,
    limits: Limits,
    out: Option<PathBuf>,
}

fn load(common: &Common) -> Result<Loaded, Failure> {
    let text = fs::read_to_string(&common.config)
        .with_context(|| format!("reading {}", common.config.display()))
        .map_err(invalid)?;
    let mut cfg = ExperimentConfig::parse(&text)
        .with_context(|| format!("in {}", common.config.display()))
        .map_err(invalid)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = common.trials {
        cfg.trials = trials;
    }
    cfg.validate()
        .with_context(|| format!("in {}", common.config.display()))
        .map_err(invalid)?;
    let limits = Limits::from_env().map_err(invalid)?;
    let setup = cfg.setup().context("deriving the test channel").map_err(invalid)?;
    for y in &setup.degenerate_rows {
        eprintln!("warning: reproduction symbol {y} has zero probability; its test-channel row is uniform");
    }

    if let Some(jobs) = common.jobs.filter(|&j| j > 0) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker threads")
            .map_err(runtime)?;
    }
    let out = common.out.clone().or_else(|| cfg.output.clone());
    Ok(Loaded {
        cfg,
        setup,
        limits,
        out,
    })
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, bytes)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(runtime),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .context("writing to stdout")
                .map_err(runtime)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::RdCurve(common) => {
            let l = load(&common)?;
            let csv = experiments::rd_curve_csv(&l.cfg).map_err(runtime)?;
            emit(l.out.as_deref(), csv.as_bytes())
        }
        Command::SoftCover(common) => {
            let l = load(&common)?;
            if l.cfg.trials < 2 {
                return Err(invalid(anyhow!("soft-cover needs at least 2 trials for a standard error")));
            }
            let csv = experiments::soft_cover_csv(&l.cfg, &l.setup, &l.limits).map_err(runtime)?;
            emit(l.out.as_deref(), csv.as_bytes())
        }
        Command::Distortion(common) => {
            let l = load(&common)?;
            let reports = experiments::distortion_reports(&l.cfg, &l.setup, &l.limits).map_err(runtime)?;
            for r in reports.iter().filter(|r| r.failures > 0) {
                eprintln!(
                    "warning: n={} R={}: {} of {} trials hit an all-zero likelihood and were excluded",
                    r.n,
                    r.rate,
                    r.failures,
                    r.trials.len()
                );
            }
            emit(l.out.as_deref(), experiments::distortion_csv(&reports).as_bytes())
        }
        Command::ProofCheck { common, codebook } => {
            let l = load(&common)?;
            let cb = codebook
                .map(|path| {
                    let bytes = fs::read(&path)
                        .with_context(|| format!("reading {}", path.display()))
                        .map_err(invalid)?;
                    Codebook::from_bytes(&bytes)
                        .with_context(|| format!("decoding {}", path.display()))
                        .map_err(invalid)
                })
                .transpose()?;
            let csv = experiments::proof_check_csv(&l.cfg, &l.setup, cb.as_ref(), &l.limits).map_err(runtime)?;
            emit(l.out.as_deref(), csv.as_bytes())
        }
        Command::Codebook(common) => {
            let l = load(&common)?;
            let cb = experiments::make_codebook(&l.cfg, &l.setup, &l.limits).map_err(runtime)?;
            emit(l.out.as_deref(), &cb.to_bytes())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
