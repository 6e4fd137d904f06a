//! Run configuration: one TOML file per sweep, with command-line overrides.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, SourceParams};
use crate::finite_key::{KeyMode, SecurityParams};
use crate::optimizer::OptimizerSettings;
use crate::rfi::ProtocolVariant;
use crate::sdp::DEFAULT_RELAXATION;

/// A sweep axis, written either as an explicit list or as an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Grid {
    pub fn range(start: f64, stop: f64, step: f64) -> Self {
        Grid::Range { start, stop, step }
    }

    /// Grid points in increasing order. Range points are rounded to 12
    /// decimals so that 0.1-steps print as 0.3, not 0.30000000000000004.
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { start, stop, step } => {
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
            }
        }
    }

    fn validate(&self, name: &str) -> Result<(), String> {
        match self {
            Grid::List(v) => {
                if v.is_empty() {
                    return Err(format!("{name}: grid is empty"));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(format!("{name}: grid values must be finite"));
                }
                if v.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(format!("{name}: grid must be strictly increasing"));
                }
            }
            Grid::Range { start, stop, step } => {
                if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
                    return Err(format!("{name}: range bounds must be finite"));
                }
                if *step <= 0.0 {
                    return Err(format!("{name}: step must be positive"));
                }
                if stop < start {
                    return Err(format!("{name}: range is empty (stop {stop} < start {start})"));
                }
            }
        }
        Ok(())
    }
}

/// Source settings as they appear in a config: ω = 0 and the basis split
/// follows the variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    pub pr_z: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub mu: f64,
    pub nu: f64,
    pub n_pulses: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self { pr_z: 0.90, p_mu: 0.60, p_nu: 0.31, mu: 0.58, nu: 0.25, n_pulses: 1e10 }
    }
}

impl SourceConfig {
    pub fn to_source(&self, variant: ProtocolVariant) -> SourceParams {
        SourceParams::for_variant(variant, self.pr_z, self.p_mu, self.p_nu, self.mu, self.nu, self.n_pulses)
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.mu > self.nu) {
            return Err(format!("source: need mu > nu (mu = {}, nu = {})", self.mu, self.nu));
        }
        if !(self.nu > 0.0) {
            return Err(format!("source: need nu > 0 (nu = {})", self.nu));
        }
        if !(self.pr_z > 0.0 && self.pr_z < 1.0) {
            return Err(format!("source: pr_z must lie in (0, 1), got {}", self.pr_z));
        }
        for (name, p) in [("p_mu", self.p_mu), ("p_nu", self.p_nu)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("source: {name} must be a probability, got {p}"));
            }
        }
        if self.p_mu + self.p_nu > 1.0 + 1e-12 {
            return Err(format!("source: p_mu + p_nu = {} exceeds 1", self.p_mu + self.p_nu));
        }
        if !(self.n_pulses > 0.0 && self.n_pulses.is_finite()) {
            return Err(format!("source: n_pulses must be positive, got {}", self.n_pulses));
        }
        Ok(())
    }
}

/// What `rate-single` sweeps over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    /// Equal-error channel, rate per sifted bit against e_ZZ.
    Qber,
    /// Lossy single-photon channel, rate per pulse against distance.
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub variants: Vec<ProtocolVariant>,
    pub betas: Grid,
    pub qber: Grid,
    pub distances: Grid,
    pub modes: Vec<KeyMode>,
    pub sweep: SweepAxis,
    /// Relaxation of the SDP equality constraints.
    pub delta: f64,
    pub seed: u64,
    /// Worker threads, 0 for one per core.
    pub jobs: usize,
    pub channel: ChannelParams,
    pub source: SourceConfig,
    pub security: SecurityParams,
    pub optimizer: OptimizerSettings,
    /// Counts file for `analyze-counts`, relative to the working directory.
    pub counts: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variants: ProtocolVariant::ALL.to_vec(),
            betas: Grid::List(vec![0.0]),
            qber: Grid::range(0.0, 0.15, 0.005),
            distances: Grid::range(0.0, 150.0, 10.0),
            modes: vec![KeyMode::Finite, KeyMode::Asymptotic],
            sweep: SweepAxis::Qber,
            delta: DEFAULT_RELAXATION,
            seed: 0,
            jobs: 0,
            channel: ChannelParams::default(),
            source: SourceConfig::default(),
            security: SecurityParams::default(),
            optimizer: OptimizerSettings::default(),
            counts: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> Result<String, String> {
        toml::to_string(self).map_err(|e| e.to_string())
    }

    /// Checks everything a command might read, before any computation starts.
    pub fn validate(&self) -> Result<(), String> {
        if self.variants.is_empty() {
            return Err("variants: list is empty".into());
        }
        if self.modes.is_empty() {
            return Err("modes: list is empty".into());
        }
        self.betas.validate("betas")?;
        self.qber.validate("qber")?;
        self.distances.validate("distances")?;
        if self.qber.values().iter().any(|e| !(0.0..=0.5).contains(e)) {
            return Err("qber: values must lie in [0, 0.5]".into());
        }
        if self.distances.values().iter().any(|d| *d < 0.0) {
            return Err("distances: values must be nonnegative".into());
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(format!("delta must be finite and nonnegative, got {}", self.delta));
        }
        if self.optimizer.iterations == 0 {
            return Err("optimizer.iterations must be positive".into());
        }
        self.channel.validate().map_err(|e| format!("channel: {e}"))?;
        self.source.validate()?;
        self.security.validate().map_err(|e| format!("security: {e}"))?;
        Ok(())
    }
}
