//! Channel and source models: misaligned-frame statistics tables, the
//! single-photon detection model and the phase-randomized weak coherent
//! source with three intensity levels.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::finite_key::{CountsRecord, CountsSet};
use crate::linalg::{eigenstate, Axis, KetVector};
use crate::rfi::{MeasurementStatistics, ProtocolVariant, StateLabel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("{name} = {value} is invalid: {reason}")]
    Invalid { name: &'static str, value: f64, reason: &'static str },
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> ChannelError {
    ChannelError::Invalid { name, value, reason }
}

/// A per-basis triple of values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerBasis {
    pub z: f64,
    pub x: f64,
    pub y: f64,
}

impl PerBasis {
    pub fn uniform(v: f64) -> Self {
        Self { z: v, x: v, y: v }
    }

    pub fn get(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Z => self.z,
            Axis::X => self.x,
            Axis::Y => self.y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelParams {
    /// Rotation of Bob's X–Y frame relative to Alice's, in radians.
    pub beta: f64,
    /// Bit-flip probability per prepared basis, used by [`statistics_table`].
    pub e_flip: PerBasis,
    /// Detector efficiency η_d.
    pub eta_d: f64,
    /// Dark-count probability per gate.
    pub e_d: f64,
    /// Optical intrinsic error probability.
    pub e_o: f64,
    pub distance_km: f64,
    pub loss_coeff_db_per_km: f64,
    /// Total link attenuation in dB. Overrides `loss_coeff·distance` when set.
    pub attenuation_db: Option<f64>,
    /// Extra loss in Bob's measurement arm, per measurement basis.
    pub excess_loss_db: PerBasis,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            beta: 0.0,
            e_flip: PerBasis::default(),
            eta_d: 0.13,
            e_d: 8e-6,
            e_o: 0.01,
            distance_km: 0.0,
            loss_coeff_db_per_km: 0.21,
            attenuation_db: None,
            excess_loss_db: PerBasis::default(),
        }
    }
}

impl ChannelParams {
    pub fn at_distance(mut self, km: f64) -> Self {
        self.distance_km = km;
        self.attenuation_db = None;
        self
    }

    /// Total transmittance η for Bob measuring in `basis`.
    pub fn eta(&self, basis: Axis) -> f64 {
        let link = self
            .attenuation_db
            .unwrap_or(self.loss_coeff_db_per_km * self.distance_km);
        self.eta_d * 10f64.powf(-(link + self.excess_loss_db.get(basis)) / 10.0)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        for (name, v) in [("eta_d", self.eta_d), ("e_d", self.e_d), ("e_o", self.e_o)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, v, "must be a probability"));
            }
        }
        for a in Axis::ALL {
            let e = self.e_flip.get(a);
            if !(0.0..=0.5).contains(&e) {
                return Err(invalid("e_flip", e, "must lie in [0, 0.5]"));
            }
        }
        if !(self.distance_km >= 0.0 && self.distance_km.is_finite()) {
            return Err(invalid("distance_km", self.distance_km, "must be finite and nonnegative"));
        }
        if !self.beta.is_finite() {
            return Err(invalid("beta", self.beta, "must be finite"));
        }
        if let Some(a) = self.attenuation_db {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(invalid("attenuation_db", a, "must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

/// One of the three source intensity levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityLabel {
    Mu,
    Nu,
    Omega,
}

impl IntensityLabel {
    pub const ALL: [IntensityLabel; 3] = [IntensityLabel::Mu, IntensityLabel::Nu, IntensityLabel::Omega];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            IntensityLabel::Mu => "mu",
            IntensityLabel::Nu => "nu",
            IntensityLabel::Omega => "omega",
        }
    }
}

impl fmt::Display for IntensityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntensityLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "mu" | "μ" => Ok(IntensityLabel::Mu),
            "nu" | "ν" => Ok(IntensityLabel::Nu),
            "omega" | "ω" => Ok(IntensityLabel::Omega),
            other => Err(format!("unknown intensity label '{other}' (expected mu, nu or omega)")),
        }
    }
}

/// Source settings: intensities, their probabilities, basis choices and block size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub mu: f64,
    pub nu: f64,
    pub omega: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub p_omega: f64,
    pub pr_alice: PerBasis,
    pub pr_bob: PerBasis,
    /// Total pulses N.
    pub n_pulses: f64,
}

impl SourceParams {
    /// Source with ω = 0 and the basis split used for `variant`.
    ///
    /// Alice sends Z with probability `pr_z` and splits the rest evenly over X
    /// and Y, or puts it all on X when she never prepares Y. Bob uses the same
    /// Z probability and splits the rest over the bases he measures.
    pub fn for_variant(variant: ProtocolVariant, pr_z: f64, p_mu: f64, p_nu: f64, mu: f64, nu: f64, n_pulses: f64) -> Self {
        let split = |bases: &[Axis]| {
            let rest = 1.0 - pr_z;
            if bases.contains(&Axis::Y) {
                PerBasis { z: pr_z, x: rest / 2.0, y: rest / 2.0 }
            } else {
                PerBasis { z: pr_z, x: rest, y: 0.0 }
            }
        };
        Self {
            mu,
            nu,
            omega: 0.0,
            p_mu,
            p_nu,
            p_omega: 1.0 - p_mu - p_nu,
            pr_alice: split(variant.alice_bases()),
            pr_bob: split(variant.bob_bases()),
            n_pulses,
        }
    }

    pub fn intensity(&self, k: IntensityLabel) -> f64 {
        match k {
            IntensityLabel::Mu => self.mu,
            IntensityLabel::Nu => self.nu,
            IntensityLabel::Omega => self.omega,
        }
    }

    pub fn probability(&self, k: IntensityLabel) -> f64 {
        match k {
            IntensityLabel::Mu => self.p_mu,
            IntensityLabel::Nu => self.p_nu,
            IntensityLabel::Omega => self.p_omega,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.omega >= 0.0 && self.omega <= self.nu) {
            return Err(invalid("omega", self.omega, "need 0 ≤ ω ≤ ν"));
        }
        if !(self.mu > self.nu + self.omega) {
            return Err(invalid("mu", self.mu, "need μ > ν + ω"));
        }
        for (name, p) in [("p_mu", self.p_mu), ("p_nu", self.p_nu), ("p_omega", self.p_omega)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(name, p, "must be a probability"));
            }
        }
        let total = self.p_mu + self.p_nu + self.p_omega;
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("p_mu + p_nu + p_omega", total, "must sum to 1"));
        }
        for (name, pr) in [("pr_alice", self.pr_alice), ("pr_bob", self.pr_bob)] {
            let s = pr.z + pr.x + pr.y;
            if [pr.z, pr.x, pr.y].iter().any(|p| !(0.0..=1.0).contains(p)) || (s - 1.0).abs() > 1e-9 {
                return Err(invalid(name, s, "basis probabilities must sum to 1"));
            }
        }
        if !(self.n_pulses >= 0.0 && self.n_pulses.is_finite()) {
            return Err(invalid("n_pulses", self.n_pulses, "must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Bob's eigenstate for `label` in his frame, rotated by β about Z.
pub fn bob_state(label: StateLabel, beta: f64) -> KetVector {
    let ket = eigenstate(label.basis, label.bit);
    match label.basis {
        Axis::Z => ket,
        _ => ket.rotated_about_z(beta),
    }
}

/// T = |⟨α_i|χ_j^B⟩|² with Bob's X/Y states rotated by β.
pub fn overlap_prob(alice: StateLabel, bob: StateLabel, beta: f64) -> f64 {
    eigenstate(alice.basis, alice.bit).overlap(&bob_state(bob, beta))
}

/// Probability table of the bit-flip channel for every transmitted state and
/// every outcome Bob can record.
pub fn statistics_table(variant: ProtocolVariant, params: &ChannelParams) -> Result<MeasurementStatistics, ChannelError> {
    params.validate()?;
    let mut table = BTreeMap::new();
    for alice in variant.prepared_states() {
        let e = params.e_flip.get(alice.basis);
        // Y-basis labels already account for the source's ⟨YY⟩ = −1: Bob receives Y_{i⊕1}.
        let (w_same, w_flip) = if alice.basis == Axis::Y { (e, 1.0 - e) } else { (1.0 - e, e) };
        for &basis in variant.bob_bases() {
            for bit in 0..2u8 {
                let bob = StateLabel::new(basis, bit);
                let p = 0.5
                    * (w_same * overlap_prob(alice, bob, params.beta)
                        + w_flip * overlap_prob(alice.flipped(), bob, params.beta));
                table.insert((alice, bob), p);
            }
        }
    }
    Ok(MeasurementStatistics::ProbabilityTable(table))
}

/// Probability V that Bob records a given outcome for a single photon.
pub fn detection_prob_single(t: f64, eta: f64, e_d: f64) -> f64 {
    eta * t * (1.0 - e_d) + (1.0 - eta) * e_d * (1.0 - e_d) + 0.5 * (eta * e_d + (1.0 - eta) * e_d * e_d)
}

/// Gain and error rate for one (Alice basis, Bob basis) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellObservables {
    pub gain: f64,
    /// Error gain W (only meaningful for the weak coherent source).
    pub error_gain: f64,
    /// Observed error rate after the flip convention, E = min(Ẽ, 1 − Ẽ).
    pub error_rate: f64,
}

fn cell_pairs(variant: ProtocolVariant) -> impl Iterator<Item = (Axis, Axis)> {
    variant
        .alice_bases()
        .iter()
        .flat_map(move |&a| variant.bob_bases().iter().map(move |&b| (a, b)))
}

/// Transmission probabilities T for the four (i, j) combinations, indexed [i][j].
fn overlaps(a: Axis, b: Axis, beta: f64) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = overlap_prob(StateLabel::new(a, i as u8), StateLabel::new(b, j as u8), beta);
        }
    }
    out
}

/// Single-photon gain Q¹ and error rate E¹ per basis pair.
pub fn single_photon_observables(variant: ProtocolVariant, params: &ChannelParams) -> BTreeMap<(Axis, Axis), CellObservables> {
    cell_pairs(variant)
        .map(|(a, b)| {
            let eta = params.eta(b);
            let t = overlaps(a, b, params.beta);
            let v = |i: usize, j: usize| detection_prob_single(t[i][j], eta, params.e_d);
            let gain = 0.5 * (v(0, 0) + v(1, 1) + v(0, 1) + v(1, 0));
            let e1 = (v(0, 1) + v(1, 0)) / (2.0 * gain);
            let tilde = params.e_o * (1.0 - 2.0 * e1) + e1;
            let obs = CellObservables {
                gain,
                error_gain: tilde * gain,
                error_rate: tilde.min(1.0 - tilde),
            };
            ((a, b), obs)
        })
        .collect()
}

/// n-photon yield of the detection model for one (α_i, χ_j) cell.
pub fn photon_yield(n: u32, t: f64, eta: f64, e_d: f64) -> f64 {
    let a = eta * t;
    let d = 1.0 - e_d;
    let n = n as i32;
    0.5 * (1.0 + d * ((1.0 - eta + a).powi(n) - (1.0 - a).powi(n) - d * (1.0 - eta).powi(n)))
}

fn wcs_gain_raw(k: f64, t: f64, eta: f64, e_d: f64) -> f64 {
    let a = eta * t;
    let d = 1.0 - e_d;
    0.5 * (1.0 + d * (((-eta + a) * k).exp() - (-a * k).exp() - d * (-eta * k).exp()))
}

/// Gain Q_{k,α_i,χ_j} of a phase-randomized coherent pulse with mean photon number k.
pub fn wcs_gain(k: f64, alice: StateLabel, bob: StateLabel, params: &ChannelParams) -> f64 {
    wcs_gain_raw(k, overlap_prob(alice, bob, params.beta), params.eta(bob.basis), params.e_d)
}

/// Q^k, W^k and E^k per (Alice basis, Bob basis, intensity).
pub fn wcs_observables(
    variant: ProtocolVariant,
    params: &ChannelParams,
    source: &SourceParams,
) -> BTreeMap<(Axis, Axis, IntensityLabel), CellObservables> {
    let mut out = BTreeMap::new();
    for (a, b) in cell_pairs(variant) {
        let eta = params.eta(b);
        let t = overlaps(a, b, params.beta);
        for label in IntensityLabel::ALL {
            let k = source.intensity(label);
            let q = |i: usize, j: usize| wcs_gain_raw(k, t[i][j], eta, params.e_d);
            let gain = 0.5 * (q(0, 0) + q(1, 0) + q(1, 1) + q(0, 1));
            let w_tilde = 0.5 * (q(1, 0) + q(0, 1));
            let error_gain = params.e_o * (gain - 2.0 * w_tilde) + w_tilde;
            let tilde = error_gain / gain;
            out.insert(
                (a, b, label),
                CellObservables {
                    gain,
                    error_gain,
                    error_rate: tilde.min(1.0 - tilde),
                },
            );
        }
    }
    out
}

/// Expected detection and error counts n = N p_k Pr_α Pr_χ Q, m = N p_k Pr_α Pr_χ W.
pub fn expected_counts(
    variant: ProtocolVariant,
    params: &ChannelParams,
    source: &SourceParams,
) -> Result<CountsSet, ChannelError> {
    params.validate()?;
    source.validate()?;
    let obs = wcs_observables(variant, params, source);
    let mut set = CountsSet::new();
    for (a, b) in cell_pairs(variant) {
        let weight = source.n_pulses * source.pr_alice.get(a) * source.pr_bob.get(b);
        let mut rec = CountsRecord::new(a, b);
        for label in IntensityLabel::ALL {
            let o = obs[&(a, b, label)];
            let w = weight * source.probability(label);
            rec.n[label.index()] = w * o.gain;
            rec.m[label.index()] = w * o.error_gain;
        }
        set.insert(rec);
    }
    Ok(set)
}

/// Draws Poisson-distributed counts around the expectations in `expected`.
///
/// Errors and non-errors are sampled independently, so m ≤ n always holds.
pub fn sample_counts<R: Rng + ?Sized>(expected: &CountsSet, rng: &mut R) -> CountsSet {
    let mut draw = |lambda: f64| -> f64 {
        if lambda <= 0.0 {
            0.0
        } else {
            Poisson::new(lambda).expect("finite positive rate").sample(rng)
        }
    };
    let mut out = CountsSet::new();
    for rec in expected.records() {
        let mut s = CountsRecord::new(rec.alice, rec.bob);
        for k in 0..3 {
            let m = draw(rec.m[k]);
            s.m[k] = m;
            s.n[k] = m + draw((rec.n[k] - rec.m[k]).max(0.0));
        }
        out.insert(s);
    }
    out
}
