//! Decoy-state estimation with finite-size corrections.
//!
//! Counts from the three intensity levels give lower bounds on vacuum and
//! single-photon detections, an upper bound on the single-photon error rate
//! and, via a random-sampling correction, phase-error rates for the
//! monitoring cells. [`key_length`] combines them into a key length secure
//! against coherent attacks.

mod counts;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use counts::{CountsError, CountsRecord, CountsSet, COLUMNS};

use crate::channel::{IntensityLabel, SourceParams};
use crate::linalg::{binary_entropy_clamped, Axis};
use crate::rfi::ProtocolVariant;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FiniteKeyError {
    #[error("intensities must satisfy μ > ν + ω and 0 ≤ ω < ν (got μ = {mu}, ν = {nu}, ω = {omega})")]
    IntensityOrdering { mu: f64, nu: f64, omega: f64 },
    #[error("decoy denominator μ(ν−ω) − ν² + ω² = {0} is not positive")]
    Denominator(f64),
    #[error("no single-photon events could be certified")]
    NoSinglePhotonEvents,
    #[error("{name} = {value} must lie in (0, 1)")]
    Security { name: &'static str, value: f64 },
}

/// Failure probabilities and error-correction inefficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SecurityParams {
    pub epsilon_ec: f64,
    pub epsilon_pa: f64,
    pub epsilon_bar: f64,
    /// Failure probability of each parameter estimate.
    pub epsilon: f64,
    /// Error-correction inefficiency f.
    pub f: f64,
}

impl Default for SecurityParams {
    fn default() -> Self {
        Self { epsilon_ec: 1e-10, epsilon_pa: 1e-10, epsilon_bar: 1e-10, epsilon: 1e-10, f: 1.16 }
    }
}

impl SecurityParams {
    pub fn uniform(eps: f64) -> Self {
        Self { epsilon_ec: eps, epsilon_pa: eps, epsilon_bar: eps, epsilon: eps, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), FiniteKeyError> {
        for (name, value) in [
            ("epsilon_ec", self.epsilon_ec),
            ("epsilon_pa", self.epsilon_pa),
            ("epsilon_bar", self.epsilon_bar),
            ("epsilon", self.epsilon),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(FiniteKeyError::Security { name, value });
            }
        }
        if !(self.f >= 1.0 && self.f.is_finite()) {
            return Err(FiniteKeyError::Security { name: "f", value: self.f });
        }
        Ok(())
    }
}

/// Finite block with all corrections, or the infinite-key limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeyMode {
    Finite,
    /// No statistical fluctuations and no ε-dependent terms.
    Asymptotic,
}

impl KeyMode {
    pub fn name(self) -> &'static str {
        match self {
            KeyMode::Finite => "finite",
            KeyMode::Asymptotic => "asymptotic",
        }
    }

    fn estimation_epsilon(self, security: &SecurityParams) -> f64 {
        match self {
            KeyMode::Finite => security.epsilon,
            KeyMode::Asymptotic => 1.0,
        }
    }
}

/// τ_n = Σ_k e^{−k} k^n p_k / n!, the probability that Alice emits n photons.
pub fn tau(n: u32, source: &SourceParams) -> f64 {
    let fact: f64 = (1..=n).map(f64::from).product();
    IntensityLabel::ALL
        .iter()
        .map(|&k| {
            let x = source.intensity(k);
            let pow = if n == 0 { 1.0 } else { x.powi(n as i32) };
            (-x).exp() * pow * source.probability(k) / fact
        })
        .sum()
}

/// Counts rescaled by e^k/p_k and shifted by ±√(total/2 · ln(1/ε)), floored at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftedCounts {
    pub n_minus: [f64; 3],
    pub n_plus: [f64; 3],
    pub m_minus: [f64; 3],
    pub m_plus: [f64; 3],
}

impl ShiftedCounts {
    fn get(arr: &[f64; 3], k: IntensityLabel) -> f64 {
        arr[k.index()]
    }
}

/// Hoeffding-style shifted counts for every intensity. `epsilon = 1` gives the unshifted limit.
pub fn fluctuation_bounds(counts: &CountsRecord, source: &SourceParams, epsilon: f64) -> ShiftedCounts {
    let log_term = (1.0 / epsilon).ln();
    let dn = (counts.n_total() / 2.0 * log_term).sqrt();
    let dm = (counts.m_total() / 2.0 * log_term).sqrt();
    let mut out = ShiftedCounts { n_minus: [0.0; 3], n_plus: [0.0; 3], m_minus: [0.0; 3], m_plus: [0.0; 3] };
    for k in IntensityLabel::ALL {
        let p = source.probability(k);
        let i = k.index();
        if p <= 0.0 {
            // An intensity that is never sent contributes nothing.
            continue;
        }
        let scale = source.intensity(k).exp() / p;
        out.n_minus[i] = (scale * (counts.n[i] - dn)).max(0.0);
        out.n_plus[i] = (scale * (counts.n[i] + dn)).max(0.0);
        out.m_minus[i] = (scale * (counts.m[i] - dm)).max(0.0);
        out.m_plus[i] = (scale * (counts.m[i] + dm)).max(0.0);
    }
    out
}

fn check_intensities(source: &SourceParams) -> Result<(), FiniteKeyError> {
    let (mu, nu, omega) = (source.mu, source.nu, source.omega);
    if !(omega >= 0.0 && nu > omega && mu > nu + omega) {
        return Err(FiniteKeyError::IntensityOrdering { mu, nu, omega });
    }
    Ok(())
}

/// s_0 = max[τ_0 (ν n⁻_ω − ω n⁺_ν)/(ν − ω), 0].
pub fn vacuum_events(shifted: &ShiftedCounts, source: &SourceParams) -> Result<f64, FiniteKeyError> {
    check_intensities(source)?;
    let (nu, omega) = (source.nu, source.omega);
    let n_minus_omega = ShiftedCounts::get(&shifted.n_minus, IntensityLabel::Omega);
    let n_plus_nu = ShiftedCounts::get(&shifted.n_plus, IntensityLabel::Nu);
    Ok((tau(0, source) * (nu * n_minus_omega - omega * n_plus_nu) / (nu - omega)).max(0.0))
}

/// Lower bound on single-photon detections s_1.
pub fn single_photon_events(shifted: &ShiftedCounts, s0: f64, source: &SourceParams) -> Result<f64, FiniteKeyError> {
    check_intensities(source)?;
    let (mu, nu, omega) = (source.mu, source.nu, source.omega);
    let den = mu * (nu - omega) - nu * nu + omega * omega;
    if den <= 0.0 {
        return Err(FiniteKeyError::Denominator(den));
    }
    let n = |arr: &[f64; 3], k| ShiftedCounts::get(arr, k);
    let tau0 = tau(0, source);
    let vacuum_share = if tau0 > 0.0 { s0 / tau0 } else { 0.0 };
    let bracket = n(&shifted.n_minus, IntensityLabel::Nu)
        - n(&shifted.n_plus, IntensityLabel::Omega)
        - (nu * nu - omega * omega) / (mu * mu) * (n(&shifted.n_plus, IntensityLabel::Mu) - vacuum_share);
    Ok((tau(1, source) * mu / den * bracket).max(0.0))
}

/// Upper bound on the single-photon error rate, capped at ½.
pub fn single_photon_qber(shifted: &ShiftedCounts, s1: f64, source: &SourceParams) -> Result<f64, FiniteKeyError> {
    check_intensities(source)?;
    if s1 <= 0.0 {
        return Err(FiniteKeyError::NoSinglePhotonEvents);
    }
    let m_plus_nu = ShiftedCounts::get(&shifted.m_plus, IntensityLabel::Nu);
    let m_minus_omega = ShiftedCounts::get(&shifted.m_minus, IntensityLabel::Omega);
    let e = tau(1, source) * (m_plus_nu - m_minus_omega) / ((source.nu - source.omega) * s1);
    Ok(e.clamp(0.0, 0.5))
}

/// γ(a, b, c, d) = √[(c+d)(1−b)b/(cd) · ln((c+d)/(2π cd (1−b) b a²))].
///
/// Returns `Some(0)` for b = 0 (the limit of the expression) and whenever the
/// logarithm is nonpositive, where the correction has no effect. Returns
/// `None` when the logarithm's argument is not a positive number, e.g. for an
/// empty sample.
pub fn gamma(a: f64, b: f64, c: f64, d: f64) -> Option<f64> {
    if b <= 0.0 && c > 0.0 && d > 0.0 {
        return Some(0.0);
    }
    let spread = (1.0 - b) * b;
    let arg = (c + d) / (2.0 * PI * c * d * spread * a * a);
    if !(arg > 0.0) || !arg.is_finite() {
        return None;
    }
    if arg <= 1.0 {
        return Some(0.0);
    }
    Some(((c + d) * spread / (c * d) * arg.ln()).sqrt())
}

/// Phase-error bound e = min(ẽ + γ(ε, ẽ, s_κζ,1, s_zz,1), ½).
pub fn phase_error_rate(e_tilde: f64, s_kz_1: f64, s_zz_1: f64, security: &SecurityParams) -> f64 {
    match gamma(security.epsilon, e_tilde, s_kz_1, s_zz_1) {
        Some(g) => (e_tilde + g).min(0.5),
        None => 0.5,
    }
}

/// Decoy bounds for one basis-pair cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    pub s0: f64,
    pub s1: f64,
    /// Single-photon error rate bound; ½ when no single-photon events are certified.
    pub e1: f64,
}

pub fn estimate_cell(counts: &CountsRecord, source: &SourceParams, epsilon: f64) -> Result<CellEstimate, FiniteKeyError> {
    let shifted = fluctuation_bounds(counts, source, epsilon);
    let s0 = vacuum_events(&shifted, source)?;
    let s1 = single_photon_events(&shifted, s0, source)?;
    let e1 = match single_photon_qber(&shifted, s1, source) {
        Ok(e) => e,
        Err(FiniteKeyError::NoSinglePhotonEvents) => 0.5,
        Err(e) => return Err(e),
    };
    Ok(CellEstimate { s0, s1, e1 })
}

/// Phase-error estimate for one monitoring cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    pub s1: f64,
    /// The single-photon error bound ẽ from the cell's own counts.
    pub e_tilde: f64,
    /// ẽ with the random-sampling correction, capped at ½.
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoyEstimate {
    pub s_zz_0: f64,
    pub s_zz_1: f64,
    pub e_zz_1: f64,
    pub phase: BTreeMap<(Axis, Axis), PhaseEstimate>,
}

impl DecoyEstimate {
    pub fn phase_error(&self, alice: Axis, bob: Axis) -> Option<f64> {
        self.phase.get(&(alice, bob)).map(|p| p.e)
    }
}

/// Runs the estimation chain on the ZZ cell and every monitoring cell of `variant`.
///
/// Monitoring cells are first relabelled with [`CountsRecord::flipped_to_minority`].
pub fn decoy_estimate(
    variant: ProtocolVariant,
    counts: &CountsSet,
    source: &SourceParams,
    security: &SecurityParams,
    mode: KeyMode,
) -> Result<DecoyEstimate, FiniteKeyError> {
    let eps = mode.estimation_epsilon(security);
    let zz = estimate_cell(&counts.get_or_empty(Axis::Z, Axis::Z), source, eps)?;
    let mut phase = BTreeMap::new();
    for &(a, b) in variant.monitoring_pairs() {
        let cell = counts.get_or_empty(a, b).flipped_to_minority();
        let est = estimate_cell(&cell, source, eps)?;
        let e = if est.s1 <= 0.0 || zz.s1 <= 0.0 {
            0.5
        } else {
            match mode {
                KeyMode::Finite => phase_error_rate(est.e1, est.s1, zz.s1, security),
                KeyMode::Asymptotic => est.e1,
            }
        };
        phase.insert((a, b), PhaseEstimate { s1: est.s1, e_tilde: est.e1, e });
    }
    Ok(DecoyEstimate { s_zz_0: zz.s0, s_zz_1: zz.s1, e_zz_1: zz.e1, phase })
}

/// The terms of the key-length expression, before flooring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyLengthTerms {
    pub vacuum: f64,
    pub single_photon: f64,
    pub error_correction: f64,
    /// All ε- and N-dependent penalties together.
    pub finite_size: f64,
}

impl KeyLengthTerms {
    pub fn total(&self) -> f64 {
        self.vacuum + self.single_photon - self.error_correction - self.finite_size
    }
}

pub fn key_length_terms(
    est: &DecoyEstimate,
    zz: &CountsRecord,
    i_e: f64,
    security: &SecurityParams,
    n_pulses: f64,
    mode: KeyMode,
) -> KeyLengthTerms {
    let n_zz = zz.n_total();
    let e_obs = zz.error_rate();
    let finite_size = match mode {
        KeyMode::Asymptotic => 0.0,
        KeyMode::Finite => {
            let log_bar = (2.0 / security.epsilon_bar).log2();
            // Often written 7 n_zz √(log₂(2/ε̄)/n_zz), which equals 7√(n_zz log₂(2/ε̄)).
            let smoothing = if n_zz > 0.0 { 7.0 * n_zz * (log_bar / n_zz).sqrt() } else { 0.0 };
            (2.0 / security.epsilon_ec).log2()
                + 2.0 * (1.0 / security.epsilon_pa).log2()
                + smoothing
                + 30.0 * (n_pulses + 1.0).log2()
        }
    };
    KeyLengthTerms {
        vacuum: est.s_zz_0,
        single_photon: est.s_zz_1 * (1.0 - i_e),
        error_correction: n_zz * security.f * binary_entropy_clamped(e_obs),
        finite_size,
    }
}

/// Secret key length ℓ, floored and clamped at zero.
pub fn key_length(
    est: &DecoyEstimate,
    zz: &CountsRecord,
    i_e: f64,
    security: &SecurityParams,
    n_pulses: f64,
    mode: KeyMode,
) -> f64 {
    let total = key_length_terms(est, zz, i_e, security, n_pulses, mode).total();
    if total.is_finite() {
        total.floor().max(0.0)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_source() -> SourceParams {
        SourceParams::for_variant(ProtocolVariant::ThreeState, 0.90, 0.60, 0.31, 0.58, 0.25, 1e10)
    }

    fn record(n: [f64; 3], m: [f64; 3]) -> CountsRecord {
        CountsRecord { alice: Axis::Z, bob: Axis::Z, n, m }
    }

    #[test]
    fn tau_values() {
        let src = reference_source();
        assert!((tau(1, &src) - 0.255_201_692_252_793_77).abs() < 1e-15);
        let total: f64 = (0..40).map(|n| tau(n, &src)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let vac = SourceParams { mu: 0.0, nu: 0.0, omega: 0.0, p_mu: 1.0, p_nu: 0.0, p_omega: 0.0, ..src };
        assert_eq!(tau(0, &vac), 1.0);
    }

    #[test]
    fn shift_magnitude() {
        let src = reference_source();
        let rec = record([6e6, 3e6, 1e6], [0.0; 3]);
        let s = fluctuation_bounds(&rec, &src, 1e-10);
        let shift = 10_729.830_131_446_735;
        let scale = src.mu.exp() / src.p_mu;
        assert!((s.n_plus[0] - scale * (6e6 + shift)).abs() < 1e-6);
        assert!((s.n_minus[0] - scale * (6e6 - shift)).abs() < 1e-6);
        let flat = fluctuation_bounds(&rec, &src, 1.0);
        assert_eq!(flat.n_plus, flat.n_minus);
        assert_eq!(flat.n_plus[1], src.nu.exp() / src.p_nu * 3e6);
        let empty = fluctuation_bounds(&record([0.0, 5.0, 0.0], [0.0; 3]), &src, 1e-10);
        assert_eq!(empty.n_minus[0], 0.0);
        assert_eq!(empty.n_minus[1], 0.0);
    }

    #[test]
    fn vacuum_bound_with_zero_omega() {
        let src = reference_source();
        let rec = record([5e6, 2e6, 300.0], [2e4, 9e3, 150.0]);
        let s = fluctuation_bounds(&rec, &src, 1.0);
        let s0 = vacuum_events(&s, &src).unwrap();
        assert!((s0 - tau(0, &src) * s.n_minus[2]).abs() < 1e-9 * s0);
    }

    #[test]
    fn zero_counts_give_zero_events() {
        let src = reference_source();
        let est = estimate_cell(&record([0.0; 3], [0.0; 3]), &src, 1e-10).unwrap();
        assert_eq!((est.s0, est.s1, est.e1), (0.0, 0.0, 0.5));
    }

    #[test]
    fn qber_zero_errors_and_cap() {
        let src = reference_source();
        let rec = record([5e6, 2e6, 300.0], [0.0; 3]);
        let s = fluctuation_bounds(&rec, &src, 1.0);
        let s0 = vacuum_events(&s, &src).unwrap();
        let s1 = single_photon_events(&s, s0, &src).unwrap();
        assert_eq!(single_photon_qber(&s, s1, &src).unwrap(), 0.0);
        let noisy = record([5e6, 2e6, 300.0], [2e6, 1e6, 150.0]);
        let s = fluctuation_bounds(&noisy, &src, 1e-10);
        assert_eq!(single_photon_qber(&s, 1.0, &src).unwrap(), 0.5);
        assert_eq!(single_photon_qber(&s, 0.0, &src), Err(FiniteKeyError::NoSinglePhotonEvents));
    }

    #[test]
    fn intensity_ordering_is_enforced() {
        let src = SourceParams { nu: 0.0, ..reference_source() };
        let s = fluctuation_bounds(&record([1.0; 3], [0.0; 3]), &src, 1.0);
        assert!(matches!(vacuum_events(&s, &src), Err(FiniteKeyError::IntensityOrdering { .. })));
        assert!(matches!(single_photon_events(&s, 0.0, &src), Err(FiniteKeyError::IntensityOrdering { .. })));
    }

    #[test]
    fn gamma_oracle_values() {
        // Reference values from a 40-digit evaluation of the same expression.
        let g = gamma(1e-10, 0.05, 1e6, 1e6).unwrap();
        assert!((g - 0.001_800_876_526_439_509_7).abs() < 1e-15, "{g}");
        let g = gamma(1e-10, 0.02, 3e5, 2e7).unwrap();
        assert!((g - 0.001_535_382_461_317_869).abs() < 1e-15, "{g}");
        assert_eq!(gamma(1e-10, 0.0, 1e6, 1e6), Some(0.0));
        assert_eq!(gamma(1e-10, 0.05, 0.0, 0.0), None);
        // Huge epsilon makes the logarithm negative: no correction.
        assert_eq!(gamma(0.9, 0.4, 1e9, 1e9), Some(0.0));
    }

    #[test]
    fn phase_error_limits() {
        let sec = SecurityParams::default();
        let e = phase_error_rate(0.03, 1e14, 1e14, &sec);
        assert!((e - 0.03).abs() < 1e-5);
        assert!(phase_error_rate(0.03, 1e6, 1e7, &sec) > 0.03);
        assert_eq!(phase_error_rate(0.45, 10.0, 10.0, &sec), 0.5);
        assert_eq!(phase_error_rate(0.1, 0.0, 0.0, &sec), 0.5);
    }

    #[test]
    fn key_length_clamps_and_mode() {
        let est = DecoyEstimate { s_zz_0: 1e5, s_zz_1: 2e7, e_zz_1: 0.01, phase: BTreeMap::new() };
        let zz = record([2e7, 1e7, 1e5], [1e5, 6e4, 5e4]);
        let sec = SecurityParams::default();
        assert_eq!(key_length(&est, &zz, 1.0, &sec, 1e10, KeyMode::Finite), 0.0);
        let fin = key_length(&est, &zz, 0.2, &sec, 1e10, KeyMode::Finite);
        let asy = key_length(&est, &zz, 0.2, &sec, 1e10, KeyMode::Asymptotic);
        assert!(fin > 0.0 && fin < asy);
        assert_eq!(fin.fract(), 0.0);
        let terms = key_length_terms(&est, &zz, 0.2, &sec, 1e10, KeyMode::Finite);
        let n_zz = zz.n_total();
        let direct = (2e10f64).log2() + 2.0 * 1e10f64.log2() + 7.0 * (n_zz * (2e10f64).log2()).sqrt() + 30.0 * (1e10f64 + 1.0).log2();
        assert!((terms.finite_size - direct).abs() < 1e-6 * direct);
    }

    #[test]
    fn key_length_nonincreasing_in_observed_error() {
        let est = DecoyEstimate { s_zz_0: 1e5, s_zz_1: 2e7, e_zz_1: 0.01, phase: BTreeMap::new() };
        let sec = SecurityParams::default();
        let mut prev = f64::INFINITY;
        for step in 0..=50 {
            let m = 3e7 * 0.002 * step as f64;
            let zz = record([2e7, 1e7, 0.0], [m * 2.0 / 3.0, m / 3.0, 0.0]);
            let l = key_length(&est, &zz, 0.2, &sec, 1e10, KeyMode::Finite);
            assert!(l <= prev);
            prev = l;
        }
    }

    #[test]
    fn security_validation() {
        assert!(SecurityParams::default().validate().is_ok());
        assert!(SecurityParams::uniform(0.0).validate().is_err());
        assert!(SecurityParams { f: 0.9, ..Default::default() }.validate().is_err());
    }
}
