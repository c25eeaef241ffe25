//! CSV-producing sweeps behind the command-line subcommands.
//!
//! Every CSV starts with a `#` comment line naming the table and its version,
//! followed by a fixed column header. Sweep points are evaluated concurrently
//! but rows are emitted in sweep order (`n_list` outer, `rate_list` inner, then
//! trial index), so output bytes depend only on the configuration and seed.
//! Trial rows carry both the master seed and the trial seed; summary rows
//! leave the per-trial columns empty.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::analysis::{distortion_experiment, expected_soft_cover_tv, proof_check, DistortionReport};
use crate::codec::{generate_codebook, Codebook};
use crate::config::{ExperimentConfig, Setup};
use crate::error::Result;
use crate::rd_solver::{blahut_arimoto, rd_point_at_distortion, RdPoint, DEFAULT_MAX_ITERS};
use crate::seed::trial_seed;
use crate::Limits;

pub const CSV_VERSION: u32 = 1;

pub const RD_CURVE_COLUMNS: &str = "slope,D,R,iterations,converged";
pub const SOFT_COVER_COLUMNS: &str =
    "record,n,R,M,trial,master_seed,trial_seed,tv,tv_mean,tv_stderr,repeated_codewords";
pub const DISTORTION_COLUMNS: &str =
    "record,n,R,M,trial,master_seed,trial_seed,index,distortion,all_zero_likelihood,mean,stderr,failures";
pub const PROOF_CHECK_COLUMNS: &str = "n,R,M,trial,master_seed,trial_seed,tv_joint,tv_marginal,\
conditional_max_gap,expected_distortion_q,distortion_bound_rhs,distortion_bound_rhs_tight,\
empirical_distortion,d_max,repeated_codewords";

fn header(table: &str, columns: &str) -> String {
    format!("# lel {table} v{CSV_VERSION}\n{columns}\n")
}

fn sweep(cfg: &ExperimentConfig) -> Vec<(usize, f64)> {
    cfg.n_list
        .iter()
        .flat_map(|&n| cfg.rate_list.iter().map(move |&r| (n, r)))
        .collect()
}

/// Curve points: first the configured slopes, then one point per target
/// distortion.
pub fn rd_curve_points(cfg: &ExperimentConfig) -> Result<Vec<RdPoint>> {
    let slopes = cfg.rd.effective_slopes();
    let by_slope = slopes
        .par_iter()
        .map(|&s| blahut_arimoto(&cfg.source, &cfg.distortion, s, cfg.rd.tol, DEFAULT_MAX_ITERS))
        .collect::<Result<Vec<_>>>()?;
    let by_target = cfg
        .rd
        .distortions
        .par_iter()
        .map(|&d| rd_point_at_distortion(&cfg.source, &cfg.distortion, d, cfg.rd.tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(by_slope.into_iter().chain(by_target).collect())
}

pub fn rd_curve_csv(cfg: &ExperimentConfig) -> Result<String> {
    let mut out = header("rd-curve", RD_CURVE_COLUMNS);
    for p in rd_curve_points(cfg)? {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            p.slope, p.distortion, p.rate, p.iterations, p.converged
        );
    }
    Ok(out)
}

pub fn soft_cover_csv(cfg: &ExperimentConfig, setup: &Setup, limits: &Limits) -> Result<String> {
    let reports = sweep(cfg)
        .par_iter()
        .map(|&(n, rate)| {
            expected_soft_cover_tv(
                &setup.py,
                &setup.test_channel,
                &setup.px,
                n,
                rate,
                cfg.trials,
                cfg.master_seed,
                limits,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = header("soft-cover", SOFT_COVER_COLUMNS);
    for r in reports {
        for t in &r.per_trial {
            let _ = writeln!(
                out,
                "trial,{},{},{},{},{},{},{},,,{}",
                r.n, r.rate, r.m, t.trial, r.master_seed, t.seed, t.tv, t.repeated_codewords
            );
        }
        let repeats = r.per_trial.iter().filter(|t| t.repeated_codewords).count();
        let _ = writeln!(
            out,
            "summary,{},{},{},,{},,,{},{},{}",
            r.n, r.rate, r.m, r.master_seed, r.tv_mean, r.tv_stderr, repeats
        );
    }
    Ok(out)
}

pub fn distortion_reports(cfg: &ExperimentConfig, setup: &Setup, limits: &Limits) -> Result<Vec<DistortionReport>> {
    sweep(cfg)
        .par_iter()
        .map(|&(n, rate)| {
            distortion_experiment(
                &setup.px,
                &setup.py,
                &setup.test_channel,
                &cfg.distortion,
                n,
                rate,
                cfg.trials,
                cfg.master_seed,
                limits,
            )
        })
        .collect()
}

pub fn distortion_csv(reports: &[DistortionReport]) -> String {
    let mut out = header("distortion", DISTORTION_COLUMNS);
    for r in reports {
        for t in &r.trials {
            let index = t.index.map(|i| i.to_string()).unwrap_or_default();
            let dist = t.distortion.map(|d| d.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "trial,{},{},{},{},{},{},{},{},{},,,",
                r.n,
                r.rate,
                r.m,
                t.trial,
                r.master_seed,
                t.seed,
                index,
                dist,
                t.index.is_none()
            );
        }
        let _ = writeln!(
            out,
            "summary,{},{},{},,{},,,,,{},{},{}",
            r.n, r.rate, r.m, r.master_seed, r.mean, r.stderr, r.failures
        );
    }
    out
}

/// One proof-check row per `(n, R, trial)`, or a single row for `codebook`
/// when one is supplied.
pub fn proof_check_csv(
    cfg: &ExperimentConfig,
    setup: &Setup,
    codebook: Option<&Codebook>,
    limits: &Limits,
) -> Result<String> {
    let jobs: Vec<(usize, u64, Codebook)> = match codebook {
        Some(cb) => vec![(0, cb.seed(), cb.clone())],
        None => sweep(cfg)
            .into_iter()
            .flat_map(|(n, rate)| (0..cfg.trials).map(move |t| (n, rate, t)))
            .map(|(n, rate, t)| {
                let seed = trial_seed(cfg.master_seed, t as u64);
                Ok((t, seed, generate_codebook(&setup.py, n, rate, seed, limits)?))
            })
            .collect::<Result<_>>()?,
    };
    let reports = jobs
        .par_iter()
        .map(|(_, _, cb)| proof_check(cb, &setup.test_channel, &setup.px, &cfg.distortion, limits))
        .collect::<Result<Vec<_>>>()?;
    let mut out = header("proof-check", PROOF_CHECK_COLUMNS);
    for ((trial, seed, cb), r) in jobs.iter().zip(reports) {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            cb.n(),
            cb.rate(),
            cb.m(),
            trial,
            cfg.master_seed,
            seed,
            r.tv_joint,
            r.tv_marginal,
            r.conditional_max_gap,
            r.expected_distortion_q,
            r.distortion_bound_rhs,
            r.distortion_bound_rhs_tight,
            r.empirical_distortion,
            r.d_max,
            r.repeated_codewords
        );
    }
    Ok(out)
}

/// Codebook for the first `(n, R)` of the sweep, seeded with the master seed.
pub fn make_codebook(cfg: &ExperimentConfig, setup: &Setup, limits: &Limits) -> Result<Codebook> {
    generate_codebook(&setup.py, cfg.n_list[0], cfg.rate_list[0], cfg.master_seed, limits)
}
