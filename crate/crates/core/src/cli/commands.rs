use std::path::Path;

use rand::rngs::StdRng;
use rand::SeedableRng;
use rayon::prelude::*;

use super::{CliError, SweepAxis, RunConfig, SCHEMA_VERSION};
use crate::channel::{self, ChannelParams, PerBasis};
use crate::finite_key::{CountsSet, FiniteKeyError, KeyMode};
use crate::linalg::Axis;
use crate::optimizer::{optimize_rate, OptimizedRate, RateProblem};
use crate::pipeline::{self, BoundStatus, PipelineError};
use crate::rfi::{self, ProtocolVariant};
use crate::sdp::SolverOptions;

/// CSV under construction: schema comment, header, then rows in grid order.
struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    fn new(command: &str, header: &[&str]) -> Result<Self, CliError> {
        let mut buf = Vec::new();
        buf.extend_from_slice(format!("# rfiqkd schema {SCHEMA_VERSION} {command}\n").as_bytes());
        let mut writer = csv::Writer::from_writer(buf);
        writer.write_record(header)?;
        Ok(Self { writer })
    }

    fn row(&mut self, fields: Vec<String>) -> Result<(), CliError> {
        self.writer.write_record(&fields)?;
        Ok(())
    }

    fn finish(self) -> Result<Vec<u8>, CliError> {
        self.writer.into_inner().map_err(|e| CliError::Output(e.into_error()))
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn rfi_variants(cfg: &RunConfig) -> Result<Vec<ProtocolVariant>, CliError> {
    let v: Vec<_> = cfg.variants.iter().copied().filter(|v| v.is_rfi()).collect();
    if v.is_empty() {
        return Err(CliError::Config("no RFI variant selected (bb84 has no C bound)".into()));
    }
    Ok(v)
}

fn single<T: Copy>(name: &str, values: &[T]) -> Result<T, CliError> {
    match values {
        [v] => Ok(*v),
        _ => Err(CliError::Config(format!("this command needs exactly one {name}; pass --{name}"))),
    }
}

fn all_failed(statuses: &[BoundStatus]) -> bool {
    !statuses.is_empty() && statuses.iter().all(|s| *s == BoundStatus::SolverFailed)
}

fn pipeline_error(e: PipelineError) -> CliError {
    match e {
        PipelineError::Counts(_)
        | PipelineError::FiniteKey(FiniteKeyError::Denominator(_) | FiniteKeyError::NoSinglePhotonEvents) => {
            CliError::Data(e.to_string())
        }
        _ => CliError::Config(e.to_string()),
    }
}

fn equal_error_channel(cfg: &RunConfig, e: f64, beta: f64) -> ChannelParams {
    ChannelParams { beta, e_flip: PerBasis::uniform(e), ..cfg.channel }
}

pub(super) fn curve_c(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let mut grid = Vec::new();
    for v in rfi_variants(cfg)? {
        for beta in cfg.betas.values() {
            for e in cfg.qber.values() {
                grid.push((v, beta, e));
            }
        }
    }
    let rows: Vec<(Option<f64>, BoundStatus)> = grid
        .par_iter()
        .map(|&(v, beta, e)| {
            let bound = channel::statistics_table(v, &equal_error_channel(cfg, e, beta))
                .ok()
                .and_then(|stats| rfi::c_lower_bound(v, &stats, cfg.delta, &SolverOptions::default()).ok());
            match bound {
                Some(c) => (Some(c), BoundStatus::Ok),
                None => (None, BoundStatus::SolverFailed),
            }
        })
        .collect();
    if all_failed(&rows.iter().map(|r| r.1).collect::<Vec<_>>()) {
        return Err(CliError::AllSolverFailures);
    }
    let mut t = Table::new("curve-c", &["e_zz", "beta", "variant", "c_l", "status"])?;
    for ((v, beta, e), (c, status)) in grid.iter().zip(rows) {
        t.row(vec![num(*e), num(*beta), v.to_string(), opt(c), status.name().into()])?;
    }
    t.finish()
}

pub(super) fn rate_single(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let xs = match cfg.sweep {
        SweepAxis::Qber => cfg.qber.values(),
        SweepAxis::Distance => cfg.distances.values(),
    };
    let mut grid = Vec::new();
    for &v in &cfg.variants {
        for beta in cfg.betas.values() {
            for &x in &xs {
                grid.push((v, beta, x));
            }
        }
    }
    let points: Vec<Result<pipeline::SinglePhotonPoint, PipelineError>> = grid
        .par_iter()
        .map(|&(v, beta, x)| match cfg.sweep {
            SweepAxis::Qber => pipeline::single_photon_rate_vs_qber(v, x, beta, cfg.delta),
            SweepAxis::Distance => {
                let ch = ChannelParams { beta, ..cfg.channel }.at_distance(x);
                pipeline::single_photon_rate(v, &ch, cfg.delta)
            }
        })
        .collect();
    let points = points.into_iter().collect::<Result<Vec<_>, _>>().map_err(pipeline_error)?;
    let rfi_statuses: Vec<_> = grid.iter().zip(&points).filter(|(g, _)| g.0.is_rfi()).map(|(_, p)| p.status).collect();
    if all_failed(&rfi_statuses) {
        return Err(CliError::AllSolverFailures);
    }
    let mut t = match cfg.sweep {
        SweepAxis::Qber => Table::new("rate-single", &["e_zz", "variant", "beta", "c_l", "i_e", "rate", "status"])?,
        SweepAxis::Distance => Table::new(
            "rate-single",
            &["distance_km", "variant", "beta", "e_zz", "c_l", "i_e", "gain", "rate", "status"],
        )?,
    };
    for ((v, beta, x), p) in grid.iter().zip(points) {
        let status = p.status.name().to_string();
        match cfg.sweep {
            SweepAxis::Qber => t.row(vec![num(*x), v.to_string(), num(*beta), opt(p.c_l), num(p.i_e), num(p.rate), status])?,
            SweepAxis::Distance => t.row(vec![
                num(*x),
                v.to_string(),
                num(*beta),
                num(p.e_zz),
                opt(p.c_l),
                num(p.i_e),
                num(p.gain),
                num(p.rate_per_pulse()),
                status,
            ])?,
        }
    }
    t.finish()
}

fn problem(cfg: &RunConfig, variant: ProtocolVariant, channel: ChannelParams, mode: KeyMode) -> RateProblem {
    RateProblem { variant, channel, security: cfg.security, n_pulses: cfg.source.n_pulses, mode }
}

/// (variant, β, mode) triples with a rate model; BB84 has no finite-key branch.
fn rate_targets(cfg: &RunConfig) -> Vec<(ProtocolVariant, f64, KeyMode)> {
    let mut out = Vec::new();
    for &v in &cfg.variants {
        for beta in cfg.betas.values() {
            for &mode in &cfg.modes {
                if !(v == ProtocolVariant::Bb84ThreeState && mode == KeyMode::Finite) {
                    out.push((v, beta, mode));
                }
            }
        }
    }
    out
}

fn optimized_fields(r: &OptimizedRate) -> Vec<String> {
    let p = r.params;
    let status = if r.rate > 0.0 { "ok" } else { "no_key" };
    vec![num(r.rate), num(p.pr_z), num(p.p_mu), num(p.p_nu), num(p.mu), num(p.nu), status.into()]
}

fn run_optimizations(cfg: &RunConfig, problems: &[RateProblem]) -> Result<Vec<OptimizedRate>, CliError> {
    let results: Vec<_> = problems.par_iter().map(|p| optimize_rate(p, &cfg.optimizer)).collect();
    results.into_iter().collect::<Result<Vec<_>, _>>().map_err(pipeline_error)
}

pub(super) fn rate_decoy(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let targets = rate_targets(cfg);
    if targets.is_empty() {
        return Err(CliError::Config("no (variant, mode) pair has a rate model; bb84 is asymptotic only".into()));
    }
    let mut grid = Vec::new();
    for &(v, beta, mode) in &targets {
        for d in cfg.distances.values() {
            grid.push((v, beta, mode, d));
        }
    }
    let problems: Vec<_> = grid
        .iter()
        .map(|&(v, beta, mode, d)| problem(cfg, v, ChannelParams { beta, ..cfg.channel }.at_distance(d), mode))
        .collect();
    let results = run_optimizations(cfg, &problems)?;
    let mut t = Table::new(
        "rate-decoy",
        &["distance_km", "variant", "beta", "mode", "rate", "pr_z", "p_mu", "p_nu", "mu", "nu", "status"],
    )?;
    for ((v, beta, mode, d), r) in grid.iter().zip(&results) {
        let mut row = vec![num(*d), v.to_string(), num(*beta), mode.name().into()];
        row.extend(optimized_fields(r));
        t.row(row)?;
    }
    t.finish()
}

pub(super) fn optimize(cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let targets = rate_targets(cfg);
    if targets.is_empty() {
        return Err(CliError::Config("no (variant, mode) pair has a rate model; bb84 is asymptotic only".into()));
    }
    let problems: Vec<_> = targets
        .iter()
        .map(|&(v, beta, mode)| problem(cfg, v, ChannelParams { beta, ..cfg.channel }, mode))
        .collect();
    let results = run_optimizations(cfg, &problems)?;
    let mut t = Table::new(
        "optimize",
        &["distance_km", "attenuation_db", "variant", "beta", "mode", "rate", "pr_z", "p_mu", "p_nu", "mu", "nu", "status"],
    )?;
    for ((v, beta, mode), r) in targets.iter().zip(&results) {
        let mut row = vec![num(cfg.channel.distance_km), opt(cfg.channel.attenuation_db), v.to_string(), num(*beta), mode.name().into()];
        row.extend(optimized_fields(r));
        t.row(row)?;
    }
    t.finish()
}

pub(super) fn analyze_counts(cfg: &RunConfig, path: &Path) -> Result<Vec<u8>, CliError> {
    let variant = single("variant", &cfg.variants)?;
    if variant == ProtocolVariant::Bb84ThreeState && cfg.modes.contains(&KeyMode::Finite) {
        return Err(CliError::Config("bb84 is asymptotic only; set modes = [\"asymptotic\"]".into()));
    }
    let file = std::fs::File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let counts = CountsSet::read_csv(file).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let source = cfg.source.to_source(variant);
    let mut reports = Vec::new();
    for &mode in &cfg.modes {
        let r = pipeline::analyze_counts(variant, &counts, &source, &cfg.security, mode, cfg.delta).map_err(pipeline_error)?;
        reports.push(r);
    }
    if all_failed(&reports.iter().map(|r| r.status).collect::<Vec<_>>()) {
        return Err(CliError::AllSolverFailures);
    }
    let mut t = Table::new(
        "analyze-counts",
        &[
            "variant", "mode", "s_zz_0", "s_zz_1", "e_zz", "e_xx", "e_xy", "e_yx", "e_yy", "c_l", "e_obs_zz", "key_length",
            "rate", "status",
        ],
    )?;
    use Axis::{X, Y};
    for r in &reports {
        let e = &r.estimate;
        t.row(vec![
            variant.to_string(),
            r.mode.name().into(),
            num(e.s_zz_0),
            num(e.s_zz_1),
            num(e.e_zz_1),
            opt(e.phase_error(X, X)),
            opt(e.phase_error(X, Y)),
            opt(e.phase_error(Y, X)),
            opt(e.phase_error(Y, Y)),
            opt(r.c_l),
            num(r.e_obs_zz),
            num(r.key_length),
            num(r.rate),
            r.status.name().into(),
        ])?;
    }
    t.finish()
}

pub(super) fn simulate_counts(cfg: &RunConfig, expected: bool) -> Result<Vec<u8>, CliError> {
    let variant = single("variant", &cfg.variants)?;
    let beta = single("beta", &cfg.betas.values())?;
    let channel = ChannelParams { beta, ..cfg.channel };
    let source = cfg.source.to_source(variant);
    let mean = channel::expected_counts(variant, &channel, &source).map_err(|e| CliError::Config(e.to_string()))?;
    let counts = if expected {
        mean
    } else {
        channel::sample_counts(&mean, &mut StdRng::seed_from_u64(cfg.seed))
    };
    let mut buf = format!("# rfiqkd schema {SCHEMA_VERSION} simulate-counts\n").into_bytes();
    counts.write_csv(&mut buf).map_err(|e| CliError::Output(std::io::Error::other(e)))?;
    Ok(buf)
}
