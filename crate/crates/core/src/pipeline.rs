//! End-to-end rate evaluation: counts (measured or modelled) through decoy
//! estimation and the SDP bound to a secret key rate, plus the single-photon
//! rate curves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, ChannelError, ChannelParams, PerBasis, SourceParams};
use crate::finite_key::{self, CountsError, CountsSet, DecoyEstimate, FiniteKeyError, KeyMode, SecurityParams};
use crate::linalg::{binary_entropy_clamped, Axis};
use crate::rfi::{self, ErrorRates, MeasurementStatistics, ProtocolVariant, RfiError, EVE_INFO_MAX_QBER};
use crate::sdp::SolverOptions;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Counts(#[from] CountsError),
    #[error(transparent)]
    FiniteKey(#[from] FiniteKeyError),
    #[error(transparent)]
    Rfi(#[from] RfiError),
    #[error("the {0} variant only has an asymptotic key-rate model")]
    AsymptoticOnly(ProtocolVariant),
}

/// Why a computed rate is zero, when it is not simply negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Ok,
    /// Too few single-photon events to run the bound.
    NoSinglePhotonEvents,
    /// The single-photon QBER is above the range where I_E is defined.
    QberTooHigh,
    /// The SDP was infeasible or did not converge; I_E is taken as 1.
    SolverFailed,
}

impl BoundStatus {
    pub fn name(self) -> &'static str {
        match self {
            BoundStatus::Ok => "ok",
            BoundStatus::NoSinglePhotonEvents => "no_single_photon_events",
            BoundStatus::QberTooHigh => "qber_too_high",
            BoundStatus::SolverFailed => "solver_failed",
        }
    }
}

/// Eve's information from the statistics, I_E = 1 on any failure.
fn eve_information_for(variant: ProtocolVariant, rates: ErrorRates, delta: f64) -> (Option<f64>, f64, BoundStatus) {
    if variant == ProtocolVariant::Bb84ThreeState {
        return (None, binary_entropy_clamped(rates.e_xx), BoundStatus::Ok);
    }
    if rates.e_zz > EVE_INFO_MAX_QBER {
        return (None, 1.0, BoundStatus::QberTooHigh);
    }
    let stats = MeasurementStatistics::ErrorRates(rates);
    match rfi::c_lower_bound(variant, &stats, delta, &SolverOptions::default()) {
        Ok(c) => match rfi::eve_information(c, rates.e_zz) {
            Ok(i_e) => (Some(c), i_e, BoundStatus::Ok),
            Err(_) => (Some(c), 1.0, BoundStatus::QberTooHigh),
        },
        Err(_) => (None, 1.0, BoundStatus::SolverFailed),
    }
}

fn rates_from(variant: ProtocolVariant, e_zz: f64, get: impl Fn(Axis, Axis) -> f64) -> ErrorRates {
    use Axis::{X, Y};
    match variant {
        ProtocolVariant::Bb84ThreeState => ErrorRates { e_zz, e_xx: get(X, X), e_xy: None, e_yx: None, e_yy: None },
        ProtocolVariant::ThreeState => ErrorRates::three_state(e_zz, get(X, X), get(X, Y)),
        _ => ErrorRates::full(e_zz, get(X, X), get(X, Y), get(Y, X), get(Y, Y)),
    }
}

/// Everything the counts analysis reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub variant: ProtocolVariant,
    pub mode: KeyMode,
    pub estimate: DecoyEstimate,
    pub c_l: Option<f64>,
    pub i_e: f64,
    pub status: BoundStatus,
    /// Observed Z-basis error rate over all intensities.
    pub e_obs_zz: f64,
    pub n_zz: f64,
    pub key_length: f64,
    pub rate: f64,
}

/// Runs the estimation chain on `counts` and evaluates key length and rate.
///
/// The SDP runs in error-rate mode on the single-photon bounds: e_ZZ from
/// the ZZ cell and the phase-error bounds of the monitoring cells.
pub fn analyze_counts(
    variant: ProtocolVariant,
    counts: &CountsSet,
    source: &SourceParams,
    security: &SecurityParams,
    mode: KeyMode,
    delta: f64,
) -> Result<AnalysisReport, PipelineError> {
    if variant == ProtocolVariant::Bb84ThreeState && mode == KeyMode::Finite {
        return Err(PipelineError::AsymptoticOnly(variant));
    }
    counts.validate()?;
    source.validate()?;
    if mode == KeyMode::Finite {
        security.validate()?;
    }
    let estimate = finite_key::decoy_estimate(variant, counts, source, security, mode)?;
    let (c_l, i_e, status) = if estimate.s_zz_1 <= 0.0 {
        (None, 1.0, BoundStatus::NoSinglePhotonEvents)
    } else {
        let rates = rates_from(variant, estimate.e_zz_1, |a, b| estimate.phase_error(a, b).unwrap_or(0.5));
        eve_information_for(variant, rates, delta)
    };
    let zz = counts.get_or_empty(Axis::Z, Axis::Z);
    let key_length = finite_key::key_length(&estimate, &zz, i_e, security, source.n_pulses, mode);
    let rate = if source.n_pulses > 0.0 { key_length / source.n_pulses } else { 0.0 };
    Ok(AnalysisReport {
        variant,
        mode,
        c_l,
        i_e,
        status,
        e_obs_zz: zz.error_rate(),
        n_zz: zz.n_total(),
        key_length,
        rate,
        estimate,
    })
}

/// Key rate from the expected counts of the channel model.
pub fn decoy_rate(
    variant: ProtocolVariant,
    channel: &ChannelParams,
    source: &SourceParams,
    security: &SecurityParams,
    mode: KeyMode,
    delta: f64,
) -> Result<AnalysisReport, PipelineError> {
    let counts = channel::expected_counts(variant, channel, source)?;
    analyze_counts(variant, &counts, source, security, mode, delta)
}

/// Asymptotic single-photon rate point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinglePhotonPoint {
    pub e_zz: f64,
    pub c_l: Option<f64>,
    pub i_e: f64,
    /// Key bits per sifted ZZ detection.
    pub rate: f64,
    /// Detection probability Q¹_ZZ per pulse (1 for the ideal-channel family).
    pub gain: f64,
    pub status: BoundStatus,
}

impl SinglePhotonPoint {
    /// Key bits per emitted pulse, Q¹_ZZ · R.
    pub fn rate_per_pulse(&self) -> f64 {
        self.gain * self.rate
    }
}

/// Rate of the equal-error channel: every prepared basis is flipped with
/// probability `e` and Bob's frame is rotated by `beta`.
///
/// The RFI variants bound C from the full probability table; the BB84
/// comparison uses 1 − h(e_ZZ) − h(e_XX).
pub fn single_photon_rate_vs_qber(variant: ProtocolVariant, e: f64, beta: f64, delta: f64) -> Result<SinglePhotonPoint, PipelineError> {
    let params = ChannelParams { beta, e_flip: PerBasis::uniform(e), ..ChannelParams::default() };
    if variant == ProtocolVariant::Bb84ThreeState {
        let stats = channel::statistics_table(variant, &params)?;
        let e_zz = stats.e_zz().unwrap_or(e);
        let e_xx = 0.5 * (1.0 - beta.cos() * (1.0 - 2.0 * e));
        let e_xx = e_xx.min(1.0 - e_xx);
        let i_e = binary_entropy_clamped(e_xx);
        return Ok(SinglePhotonPoint {
            e_zz,
            c_l: None,
            i_e,
            rate: rfi::bb84_asymptotic_rate(e_zz, e_xx),
            gain: 1.0,
            status: BoundStatus::Ok,
        });
    }
    if e > EVE_INFO_MAX_QBER {
        return Ok(SinglePhotonPoint { e_zz: e, c_l: None, i_e: 1.0, rate: 0.0, gain: 1.0, status: BoundStatus::QberTooHigh });
    }
    let stats = channel::statistics_table(variant, &params)?;
    let (c_l, i_e, status) = match rfi::c_lower_bound(variant, &stats, delta, &SolverOptions::default()) {
        Ok(c) => match rfi::eve_information(c, e) {
            Ok(i_e) => (Some(c), i_e, BoundStatus::Ok),
            Err(_) => (Some(c), 1.0, BoundStatus::QberTooHigh),
        },
        Err(_) => (None, 1.0, BoundStatus::SolverFailed),
    };
    let rate = (1.0 - binary_entropy_clamped(e) - i_e).max(0.0);
    Ok(SinglePhotonPoint { e_zz: e, c_l, i_e, rate, gain: 1.0, status })
}

/// Single-photon rate over the lossy channel described by `params`.
///
/// The error rates of each basis pair come from the single-photon detection
/// model. The per-pulse rate is Q¹_ZZ · max(0, 1 − h(E¹_ZZ) − I_E).
pub fn single_photon_rate(variant: ProtocolVariant, params: &ChannelParams, delta: f64) -> Result<SinglePhotonPoint, PipelineError> {
    params.validate()?;
    let obs = channel::single_photon_observables(variant, params);
    let zz = obs[&(Axis::Z, Axis::Z)];
    let rates = rates_from(variant, zz.error_rate, |a, b| obs.get(&(a, b)).map_or(0.5, |o| o.error_rate));
    let (c_l, i_e, status) = eve_information_for(variant, rates, delta);
    let rate = (1.0 - binary_entropy_clamped(zz.error_rate) - i_e).max(0.0);
    Ok(SinglePhotonPoint { e_zz: zz.error_rate, c_l, i_e, rate, gain: zz.gain, status })
}

/// QBER at which the equal-error single-photon rate drops to zero, by bisection.
pub fn error_tolerance(variant: ProtocolVariant, beta: f64, delta: f64, tolerance: f64) -> Result<f64, PipelineError> {
    let positive = |e: f64| -> Result<bool, PipelineError> { Ok(single_photon_rate_vs_qber(variant, e, beta, delta)?.rate > 0.0) };
    let (mut lo, mut hi) = (0.0, 0.5);
    if !positive(lo)? {
        return Ok(0.0);
    }
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if positive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{expected_counts, IntensityLabel};
    use crate::sdp::DEFAULT_RELAXATION;
    use std::f64::consts::PI;

    #[test]
    fn ideal_channel_rates() {
        let p = single_photon_rate_vs_qber(ProtocolVariant::ThreeState, 0.0, 0.3, DEFAULT_RELAXATION).unwrap();
        assert!((p.c_l.unwrap() - 2.0).abs() < 1e-4);
        assert!(p.rate > 0.999);
        let bb = single_photon_rate_vs_qber(ProtocolVariant::Bb84ThreeState, 0.0, PI / 4.0, DEFAULT_RELAXATION).unwrap();
        assert!((bb.rate - (1.0 - binary_entropy_clamped(0.5 * (1.0 - (PI / 4.0).cos())))).abs() < 1e-12);
    }

    #[test]
    fn six_state_tolerance() {
        let e = error_tolerance(ProtocolVariant::SixState, 0.0, DEFAULT_RELAXATION, 1e-4).unwrap();
        assert!((e - 0.126_193).abs() < 5e-4, "{e}");
    }

    #[test]
    fn zero_counts_report() {
        let src = SourceParams::for_variant(ProtocolVariant::ThreeState, 0.9, 0.6, 0.31, 0.58, 0.25, 1e10);
        let r = analyze_counts(
            ProtocolVariant::ThreeState,
            &CountsSet::new(),
            &src,
            &SecurityParams::default(),
            KeyMode::Finite,
            DEFAULT_RELAXATION,
        )
        .unwrap();
        assert_eq!(r.key_length, 0.0);
        assert_eq!(r.status, BoundStatus::NoSinglePhotonEvents);
    }

    #[test]
    fn bb84_finite_is_rejected() {
        let src = SourceParams::for_variant(ProtocolVariant::Bb84ThreeState, 0.9, 0.6, 0.31, 0.58, 0.25, 1e10);
        let err = decoy_rate(
            ProtocolVariant::Bb84ThreeState,
            &ChannelParams::default(),
            &src,
            &SecurityParams::default(),
            KeyMode::Finite,
            DEFAULT_RELAXATION,
        );
        assert!(matches!(err, Err(PipelineError::AsymptoticOnly(_))));
    }

    #[test]
    fn finite_below_asymptotic() {
        let ch = ChannelParams::default().at_distance(30.0);
        let src = SourceParams::for_variant(ProtocolVariant::ThreeState, 0.9, 0.6, 0.3, 0.55, 0.2, 1e10);
        let sec = SecurityParams::default();
        let fin = decoy_rate(ProtocolVariant::ThreeState, &ch, &src, &sec, KeyMode::Finite, DEFAULT_RELAXATION).unwrap();
        let asy = decoy_rate(ProtocolVariant::ThreeState, &ch, &src, &sec, KeyMode::Asymptotic, DEFAULT_RELAXATION).unwrap();
        assert!(fin.rate > 0.0);
        assert!(fin.rate < asy.rate);
        let counts = expected_counts(ProtocolVariant::ThreeState, &ch, &src).unwrap();
        let zz = counts.get(Axis::Z, Axis::Z).unwrap();
        assert_eq!(fin.n_zz, zz.n_total());
        assert!(zz.n_at(IntensityLabel::Mu) > zz.n_at(IntensityLabel::Nu));
    }
}
