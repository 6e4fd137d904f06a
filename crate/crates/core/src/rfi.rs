//! Constraint systems, the C lower bound, Eve's information and asymptotic
//! key rates for the RFI protocol variants.
//!
//! ρ is the entanglement-based state shared by Alice and Bob. Probabilities in
//! a [`MeasurementStatistics`] table are indexed by Alice's entanglement-based
//! outcome. Because the source gives ⟨σ_Y⊗σ_Y⟩ = −1, a Y-basis label Y_i
//! corresponds to the state Y_{i⊕1} actually reaching Bob. The table values
//! carry that flip, so the constraint operators are plain projector products.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{binary_entropy_clamped, eigenstate, Axis, Observable};
use crate::sdp::{self, ConicProblem, Constraint, Objective, SdpError, Sense, SolveStatus, SolverOptions};

/// Validity limit of the Eve's-information formula in e_ZZ.
pub const EVE_INFO_MAX_QBER: f64 = 0.159;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RfiError {
    #[error("statistics incompatible with the {variant} variant: {reason}")]
    Incompatible { variant: ProtocolVariant, reason: String },
    #[error("{name} = {value} is outside [{lo}, {hi}]")]
    OutOfRange { name: String, value: f64, lo: f64, hi: f64 },
    #[error("e_ZZ = {0} exceeds the validity limit of the Eve's-information bound")]
    QberTooHigh(f64),
    #[error("solver finished with status {0:?}")]
    Solver(SolveStatus),
    #[error(transparent)]
    Sdp(#[from] SdpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProtocolVariant {
    #[serde(rename = "six")]
    SixState,
    #[serde(rename = "four")]
    FourState,
    #[serde(rename = "three")]
    ThreeState,
    /// BB84 with the three states Z_0, Z_1, X_0 and Bob measuring Z and X.
    #[serde(rename = "bb84")]
    Bb84ThreeState,
}

impl ProtocolVariant {
    pub const ALL: [ProtocolVariant; 4] = [
        ProtocolVariant::SixState,
        ProtocolVariant::FourState,
        ProtocolVariant::ThreeState,
        ProtocolVariant::Bb84ThreeState,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolVariant::SixState => "six",
            ProtocolVariant::FourState => "four",
            ProtocolVariant::ThreeState => "three",
            ProtocolVariant::Bb84ThreeState => "bb84",
        }
    }

    /// States Alice transmits.
    pub fn prepared_states(self) -> Vec<StateLabel> {
        use Axis::*;
        let labels: &[(Axis, u8)] = match self {
            ProtocolVariant::SixState => &[(Z, 0), (Z, 1), (X, 0), (X, 1), (Y, 0), (Y, 1)],
            ProtocolVariant::FourState => &[(Z, 0), (Z, 1), (X, 0), (Y, 0)],
            ProtocolVariant::ThreeState | ProtocolVariant::Bb84ThreeState => &[(Z, 0), (Z, 1), (X, 0)],
        };
        labels.iter().map(|&(b, i)| StateLabel::new(b, i)).collect()
    }

    /// Bases Alice prepares in.
    pub fn alice_bases(self) -> &'static [Axis] {
        match self {
            ProtocolVariant::SixState | ProtocolVariant::FourState => &[Axis::Z, Axis::X, Axis::Y],
            ProtocolVariant::ThreeState | ProtocolVariant::Bb84ThreeState => &[Axis::Z, Axis::X],
        }
    }

    /// Bases Bob measures in.
    pub fn bob_bases(self) -> &'static [Axis] {
        match self {
            ProtocolVariant::Bb84ThreeState => &[Axis::Z, Axis::X],
            _ => &[Axis::Z, Axis::X, Axis::Y],
        }
    }

    /// (Alice, Bob) basis pairs whose error rates enter the phase-error analysis.
    pub fn monitoring_pairs(self) -> &'static [(Axis, Axis)] {
        use Axis::*;
        match self {
            ProtocolVariant::SixState | ProtocolVariant::FourState => &[(X, X), (X, Y), (Y, X), (Y, Y)],
            ProtocolVariant::ThreeState => &[(X, X), (X, Y)],
            ProtocolVariant::Bb84ThreeState => &[(X, X)],
        }
    }

    pub fn is_rfi(self) -> bool {
        self != ProtocolVariant::Bb84ThreeState
    }
}

impl fmt::Display for ProtocolVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "six" | "six_state" | "6" => Ok(ProtocolVariant::SixState),
            "four" | "four_state" | "4" => Ok(ProtocolVariant::FourState),
            "three" | "three_state" | "3" => Ok(ProtocolVariant::ThreeState),
            "bb84" | "bb84_three_state" => Ok(ProtocolVariant::Bb84ThreeState),
            other => Err(format!("unknown protocol variant '{other}' (expected six, four, three or bb84)")),
        }
    }
}

/// An eigenstate label such as Z_0 or X_1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateLabel {
    pub basis: Axis,
    pub bit: u8,
}

impl StateLabel {
    pub fn new(basis: Axis, bit: u8) -> Self {
        assert!(bit < 2, "bit must be 0 or 1");
        Self { basis, bit }
    }

    pub fn flipped(self) -> Self {
        Self::new(self.basis, 1 - self.bit)
    }
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.basis, self.bit)
    }
}

/// Observed error rates. The Y-prepared rates only exist when Alice uses the Y basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub e_zz: f64,
    pub e_xx: f64,
    pub e_xy: Option<f64>,
    pub e_yx: Option<f64>,
    pub e_yy: Option<f64>,
}

impl ErrorRates {
    pub fn three_state(e_zz: f64, e_xx: f64, e_xy: f64) -> Self {
        Self { e_zz, e_xx, e_xy: Some(e_xy), e_yx: None, e_yy: None }
    }

    pub fn full(e_zz: f64, e_xx: f64, e_xy: f64, e_yx: f64, e_yy: f64) -> Self {
        Self {
            e_zz,
            e_xx,
            e_xy: Some(e_xy),
            e_yx: Some(e_yx),
            e_yy: Some(e_yy),
        }
    }

    /// Rates present, in the order ZZ, XX, XY, YX, YY.
    pub fn present(&self) -> Vec<((Axis, Axis), f64)> {
        use Axis::*;
        let mut out = vec![((Z, Z), self.e_zz), ((X, X), self.e_xx)];
        for (pair, v) in [((X, Y), self.e_xy), ((Y, X), self.e_yx), ((Y, Y), self.e_yy)] {
            if let Some(v) = v {
                out.push((pair, v));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementStatistics {
    /// P_{α_i, χ_j} keyed by (Alice label, Bob outcome).
    ProbabilityTable(BTreeMap<(StateLabel, StateLabel), f64>),
    ErrorRates(ErrorRates),
}

impl MeasurementStatistics {
    /// The Z-basis QBER implied by the statistics.
    pub fn e_zz(&self) -> Option<f64> {
        match self {
            MeasurementStatistics::ErrorRates(r) => Some(r.e_zz),
            MeasurementStatistics::ProbabilityTable(t) => {
                let mut total = 0.0;
                let mut errors = 0.0;
                for (&(a, b), &p) in t {
                    if a.basis == Axis::Z && b.basis == Axis::Z {
                        total += p;
                        if a.bit != b.bit {
                            errors += p;
                        }
                    }
                }
                (total > 0.0).then(|| errors / total)
            }
        }
    }
}

/// Error operators for every basis pair used by the protocols.
///
/// ZZ and XX count disagreement; XY, YX and YY count agreement, which is how
/// their error rates are defined for the entanglement-based state.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorOperators {
    pub e_zz: Observable,
    pub e_xx: Observable,
    pub e_xy: Observable,
    pub e_yx: Observable,
    pub e_yy: Observable,
}

impl ErrorOperators {
    pub fn new() -> Self {
        Self {
            e_zz: error_operator(Axis::Z, Axis::Z),
            e_xx: error_operator(Axis::X, Axis::X),
            e_xy: error_operator(Axis::X, Axis::Y),
            e_yx: error_operator(Axis::Y, Axis::X),
            e_yy: error_operator(Axis::Y, Axis::Y),
        }
    }
}

impl Default for ErrorOperators {
    fn default() -> Self {
        Self::new()
    }
}

/// Error operator for Alice basis `a` and Bob basis `b`, (𝟙 ∓ σ_a⊗σ_b)/2.
///
/// Panics for pairs that mix Z with X or Y; those carry no error rate.
pub fn error_operator(a: Axis, b: Axis) -> Observable {
    use Axis::*;
    let sign = match (a, b) {
        (Z, Z) | (X, X) => -1.0,
        (X, Y) | (Y, X) | (Y, Y) => 1.0,
        _ => panic!("no error operator for basis pair {a}{b}"),
    };
    Observable::pauli_product(a, b).affine(0.5 * sign, 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfiBoundResult {
    pub c_l: f64,
    /// Maximal fictitious error rates; reported for the three-state variant.
    pub e_yx_max: Option<f64>,
    pub e_yy_max: Option<f64>,
    /// Eve's information at (C_L, e_ZZ); 1 when e_ZZ is outside the validity range.
    pub i_e: f64,
}

fn check_range(name: &str, value: f64, lo: f64, hi: f64) -> Result<(), RfiError> {
    if value.is_finite() && (lo..=hi).contains(&value) {
        Ok(())
    } else {
        Err(RfiError::OutOfRange { name: name.to_string(), value, lo, hi })
    }
}

/// The affine constraint list for the SDP.
pub fn build_constraints(variant: ProtocolVariant, stats: &MeasurementStatistics) -> Result<Vec<Constraint>, RfiError> {
    let incompatible = |reason: String| RfiError::Incompatible { variant, reason };
    match stats {
        MeasurementStatistics::ProbabilityTable(table) => {
            let prepared = variant.prepared_states();
            let bob = variant.bob_bases();
            let mut out = Vec::with_capacity(table.len());
            for (&(a, b), &p) in table {
                if !prepared.contains(&a) {
                    return Err(incompatible(format!("state {a} is not transmitted")));
                }
                if !bob.contains(&b.basis) {
                    return Err(incompatible(format!("Bob does not measure in {}", b.basis)));
                }
                check_range(&format!("P[{a},{b}]"), p, 0.0, 1.0)?;
                let op = Observable::projector_product(&eigenstate(a.basis, a.bit), &eigenstate(b.basis, b.bit));
                out.push(Constraint::new(op, p));
            }
            Ok(out)
        }
        MeasurementStatistics::ErrorRates(rates) => {
            let has_y = (rates.e_yx.is_some(), rates.e_yy.is_some());
            match variant {
                ProtocolVariant::ThreeState => {
                    if rates.e_xy.is_none() || has_y != (false, false) {
                        return Err(incompatible("expected exactly e_ZZ, e_XX and e_XY".into()));
                    }
                }
                ProtocolVariant::FourState | ProtocolVariant::SixState => {
                    if rates.e_xy.is_none() || has_y != (true, true) {
                        return Err(incompatible("expected e_ZZ, e_XX, e_XY, e_YX and e_YY".into()));
                    }
                }
                ProtocolVariant::Bb84ThreeState => {
                    if rates.e_xy.is_some() || has_y != (false, false) {
                        return Err(incompatible("expected exactly e_ZZ and e_XX".into()));
                    }
                }
            }
            rates
                .present()
                .into_iter()
                .map(|((a, b), e)| {
                    check_range(&format!("e_{a}{b}"), e, 0.0, 0.5)?;
                    Ok(Constraint::new(error_operator(a, b), e))
                })
                .collect()
        }
    }
}

/// The four X/Y correlators whose squares make up C.
pub fn correlation_terms() -> Vec<Observable> {
    use Axis::*;
    [(X, X), (X, Y), (Y, X), (Y, Y)]
        .into_iter()
        .map(|(a, b)| Observable::pauli_product(a, b))
        .collect()
}

fn require_optimal(report: sdp::SolveReport) -> Result<sdp::SolveReport, RfiError> {
    if report.is_optimal() {
        Ok(report)
    } else {
        Err(RfiError::Solver(report.status))
    }
}

/// C_L: the minimum of Σ_{κ,ζ∈{X,Y}} Tr(σ_κ⊗σ_ζ ρ)² over states consistent with `stats`.
pub fn lower_bound_c(variant: ProtocolVariant, stats: &MeasurementStatistics, delta: f64) -> Result<RfiBoundResult, RfiError> {
    lower_bound_c_with(variant, stats, delta, &SolverOptions::default())
}

pub fn lower_bound_c_with(
    variant: ProtocolVariant,
    stats: &MeasurementStatistics,
    delta: f64,
    options: &SolverOptions,
) -> Result<RfiBoundResult, RfiError> {
    let c_l = c_lower_bound(variant, stats, delta, options)?;
    let (e_yx_max, e_yy_max) = if variant == ProtocolVariant::ThreeState {
        let (yx, yy) = max_phase_errors_with(variant, stats, delta, options)?;
        (Some(yx), Some(yy))
    } else {
        (None, None)
    };
    let i_e = stats
        .e_zz()
        .and_then(|e| eve_information(c_l, e).ok())
        .unwrap_or(1.0);
    Ok(RfiBoundResult { c_l, e_yx_max, e_yy_max, i_e })
}

/// C_L alone, clamped to [0, 2], without the phase-error maximizations.
pub fn c_lower_bound(
    variant: ProtocolVariant,
    stats: &MeasurementStatistics,
    delta: f64,
    options: &SolverOptions,
) -> Result<f64, RfiError> {
    let constraints = build_constraints(variant, stats)?;
    let problem = ConicProblem::new(Objective::SumOfSquares { terms: correlation_terms() }, constraints).with_relaxation(delta);
    let report = require_optimal(sdp::solve_min_sum_squares(&problem, options)?)?;
    Ok(report.optimal_value.clamp(0.0, 2.0))
}

/// Upper bounds on the fictitious error rates (e_YX, e_YY) over states consistent with `stats`.
pub fn max_phase_errors(variant: ProtocolVariant, stats: &MeasurementStatistics, delta: f64) -> Result<(f64, f64), RfiError> {
    max_phase_errors_with(variant, stats, delta, &SolverOptions::default())
}

pub fn max_phase_errors_with(
    variant: ProtocolVariant,
    stats: &MeasurementStatistics,
    delta: f64,
    options: &SolverOptions,
) -> Result<(f64, f64), RfiError> {
    let constraints = build_constraints(variant, stats)?;
    let ops = ErrorOperators::new();
    let solve_max = |op: Observable| -> Result<f64, RfiError> {
        let problem = ConicProblem::new(Objective::Linear { operator: op, sense: Sense::Maximize }, constraints.clone())
            .with_relaxation(delta);
        Ok(require_optimal(sdp::solve_linear(&problem, options)?)?.optimal_value)
    };
    Ok((solve_max(ops.e_yx)?, solve_max(ops.e_yy)?))
}

/// C' = Σ (1 − 2e)² over the four X/Y error rates.
pub fn c_prime(e_xx: f64, e_xy: f64, e_yx: f64, e_yy: f64) -> Result<f64, RfiError> {
    let rates = [("e_XX", e_xx), ("e_XY", e_xy), ("e_YX", e_yx), ("e_YY", e_yy)];
    for (name, e) in rates {
        check_range(name, e, 0.0, 0.5)?;
    }
    Ok(rates.iter().map(|(_, e)| (1.0 - 2.0 * e).powi(2)).sum())
}

/// C' with e_YX and e_YY replaced by their worst cases.
///
/// Each maximum is capped at ½: the rate is only known to lie between its
/// minimum and maximum, and when ½ is inside that range the term vanishes.
pub fn separate_bound(e_xx: f64, e_xy: f64, e_yx_max: f64, e_yy_max: f64) -> Result<f64, RfiError> {
    c_prime(e_xx, e_xy, e_yx_max.clamp(0.0, 0.5), e_yy_max.clamp(0.0, 0.5))
}

/// Eve's information I_E(C, e_ZZ) in bits.
pub fn eve_information(c: f64, e_zz: f64) -> Result<f64, RfiError> {
    check_range("e_ZZ", e_zz, 0.0, 0.5)?;
    // Small solver overshoots of the [0, 2] range are rounding, not data.
    check_range("C", c, -1e-6, 2.0 + 1e-6)?;
    if e_zz > EVE_INFO_MAX_QBER {
        return Err(RfiError::QberTooHigh(e_zz));
    }
    let half_c = c.clamp(0.0, 2.0) / 2.0;
    let one_minus = 1.0 - e_zz;
    let mu = (half_c.sqrt() / one_minus).min(1.0);
    let mut info = one_minus * binary_entropy_clamped((1.0 + mu) / 2.0);
    if e_zz > 0.0 {
        let radicand = (half_c - one_minus * one_minus * mu * mu).max(0.0);
        let nu = (radicand.sqrt() / e_zz).min(1.0);
        info += e_zz * binary_entropy_clamped((1.0 + nu) / 2.0);
    }
    Ok(info.clamp(0.0, 1.0))
}

/// R = max(0, 1 − h(e_ZZ) − I_E), zero outside the bound's validity range.
pub fn asymptotic_rate(e_zz: f64, c: f64) -> f64 {
    match eve_information(c, e_zz) {
        Ok(i_e) => (1.0 - binary_entropy_clamped(e_zz) - i_e).max(0.0),
        Err(_) => 0.0,
    }
}

/// R = max(0, 1 − h(e_ZZ) − h(e_XX)).
pub fn bb84_asymptotic_rate(e_zz: f64, e_xx: f64) -> f64 {
    (1.0 - binary_entropy_clamped(e_zz) - binary_entropy_clamped(e_xx)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TwoQubitState;

    #[test]
    fn variant_shapes() {
        assert_eq!(ProtocolVariant::SixState.prepared_states().len(), 6);
        assert_eq!(ProtocolVariant::FourState.prepared_states().len(), 4);
        assert_eq!(ProtocolVariant::ThreeState.prepared_states().len(), 3);
        assert!(!ProtocolVariant::ThreeState
            .prepared_states()
            .iter()
            .any(|s| s.basis == Axis::Y || *s == StateLabel::new(Axis::X, 1)));
        for v in ProtocolVariant::ALL {
            assert_eq!(v.name().parse::<ProtocolVariant>().unwrap(), v);
        }
        assert!("seven".parse::<ProtocolVariant>().is_err());
    }

    #[test]
    fn error_operators_trace_and_spectrum() {
        let ops = ErrorOperators::new();
        for op in [&ops.e_zz, &ops.e_xx, &ops.e_xy, &ops.e_yx, &ops.e_yy] {
            assert!((op.trace() - 2.0).abs() < 1e-14);
            for l in op.eigenvalues() {
                assert!(l.abs() < 1e-12 || (l - 1.0).abs() < 1e-12);
            }
        }
        let expected = Observable::identity().affine(0.5, 0.0).to_complex_matrix();
        let zz = Observable::pauli_product(Axis::Z, Axis::Z).to_complex_matrix().scale(-0.5);
        assert_eq!(ops.e_zz.to_complex_matrix(), expected.add(&zz).unwrap());
    }

    #[test]
    fn ideal_state_has_zero_key_errors_and_half_cross_errors() {
        let phi = TwoQubitState::phi_plus();
        let ops = ErrorOperators::new();
        assert!(ops.e_zz.expectation(&phi).abs() < 1e-15);
        assert!(ops.e_xx.expectation(&phi).abs() < 1e-15);
        assert!(ops.e_yy.expectation(&phi).abs() < 1e-15);
        assert!((ops.e_xy.expectation(&phi) - 0.5).abs() < 1e-15);
        assert!((ops.e_yx.expectation(&phi) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constraint_counts() {
        let r = MeasurementStatistics::ErrorRates(ErrorRates::three_state(0.0, 0.0, 0.5));
        assert_eq!(build_constraints(ProtocolVariant::ThreeState, &r).unwrap().len(), 3);
        assert!(build_constraints(ProtocolVariant::SixState, &r).is_err());
        let bad = MeasurementStatistics::ErrorRates(ErrorRates::three_state(0.0, 0.7, 0.5));
        assert!(matches!(
            build_constraints(ProtocolVariant::ThreeState, &bad),
            Err(RfiError::OutOfRange { .. })
        ));
        let bb = MeasurementStatistics::ErrorRates(ErrorRates { e_zz: 0.01, e_xx: 0.02, e_xy: None, e_yx: None, e_yy: None });
        assert_eq!(build_constraints(ProtocolVariant::Bb84ThreeState, &bb).unwrap().len(), 2);
    }

    #[test]
    fn table_with_untransmitted_state_is_rejected() {
        let mut t = BTreeMap::new();
        t.insert((StateLabel::new(Axis::Y, 0), StateLabel::new(Axis::Z, 0)), 0.25);
        let stats = MeasurementStatistics::ProbabilityTable(t);
        assert!(build_constraints(ProtocolVariant::ThreeState, &stats).is_err());
        assert_eq!(build_constraints(ProtocolVariant::FourState, &stats).unwrap().len(), 1);
    }

    #[test]
    fn c_prime_values() {
        assert_eq!(c_prime(0.5, 0.5, 0.5, 0.5).unwrap(), 0.0);
        assert_eq!(c_prime(0.0, 0.5, 0.5, 0.0).unwrap(), 2.0);
        // 2·(1 − 0.0524)² evaluated directly.
        let v = c_prime(0.0262, 0.5, 0.5, 0.0262).unwrap();
        assert!((v - 1.795_891_52).abs() < 1e-8, "{v}");
        assert!(c_prime(0.6, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn eve_information_limits() {
        assert!(eve_information(2.0, 0.0).unwrap().abs() < 1e-15);
        for e in [0.0, 0.05, 0.159] {
            assert!((eve_information(0.0, e).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(eve_information(1.0, 0.16), Err(RfiError::QberTooHigh(_))));
        assert_eq!(asymptotic_rate(0.16, 2.0), 0.0);
        assert!((asymptotic_rate(0.0, 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eve_information_grows_as_c_shrinks() {
        for e in [0.0, 0.01, 0.05, 0.1, 0.15] {
            let mut prev = -1.0;
            for k in (0..20).rev() {
                let c = 2.0 * k as f64 / 19.0;
                let ie = eve_information(c, e).unwrap();
                assert!(ie >= prev - 1e-9, "e={e} c={c}");
                prev = ie;
            }
        }
    }

    #[test]
    fn bb84_rate_values() {
        assert_eq!(bb84_asymptotic_rate(0.0, 0.0), 1.0);
        let r = bb84_asymptotic_rate(0.11, 0.11);
        assert!(r > 0.0 && r < 0.001, "{r}");
    }

    #[test]
    fn noiseless_three_state_reaches_maximum() {
        let stats = MeasurementStatistics::ErrorRates(ErrorRates::three_state(0.0, 0.0, 0.5));
        let r = lower_bound_c(ProtocolVariant::ThreeState, &stats, 1e-6).unwrap();
        assert!((r.c_l - 2.0).abs() < 1e-4, "{}", r.c_l);
        assert!(r.i_e < 1e-3);
        assert!(r.e_yx_max.is_some() && r.e_yy_max.is_some());
    }
}
