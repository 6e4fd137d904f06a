//! Finite-key rate maximization over (Pr_Z, p_μ, p_ν, μ, ν) with ω = 0.
//!
//! Nelder–Mead from a 3×3×3 grid of (μ, ν, Pr_Z) starts. Each start first
//! picks the best (p_μ, p_ν) from a small grid, then runs a fixed number of
//! simplex iterations. Every trial point is projected back into the feasible
//! box and probability simplex before it is evaluated, so all iterates are
//! valid protocol settings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, SourceParams};
use crate::finite_key::{KeyMode, SecurityParams};
use crate::pipeline::{self, PipelineError};
use crate::rfi::ProtocolVariant;
use crate::sdp::DEFAULT_RELAXATION;

/// Free protocol parameters. p_ω = 1 − p_μ − p_ν and ω = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub pr_z: f64,
    pub p_mu: f64,
    pub p_nu: f64,
    pub mu: f64,
    pub nu: f64,
}

/// Bounds used by the projection. All are strict enough that μ > ν > 0 and
/// every intensity is sent with positive probability.
pub const PROB_MIN: f64 = 0.01;
pub const PROB_MAX: f64 = 0.99;
pub const MU_MAX: f64 = 1.5;
pub const NU_MIN: f64 = 1e-3;
/// Minimum gap between μ and ν.
pub const INTENSITY_GAP: f64 = 1e-3;

impl ParameterVector {
    fn to_array(self) -> [f64; 5] {
        [self.pr_z, self.p_mu, self.p_nu, self.mu, self.nu]
    }

    fn from_array(x: [f64; 5]) -> Self {
        Self { pr_z: x[0], p_mu: x[1], p_nu: x[2], mu: x[3], nu: x[4] }
    }

    /// Nearest point of the feasible region: box bounds, p_μ + p_ν ≤ 1 − PROB_MIN,
    /// and NU_MIN ≤ ν ≤ μ − INTENSITY_GAP.
    pub fn projected(self) -> Self {
        let mut x = self;
        x.pr_z = x.pr_z.clamp(PROB_MIN, PROB_MAX);
        let (a, b) = project_pair(x.p_mu, x.p_nu);
        x.p_mu = a;
        x.p_nu = b;
        x.mu = x.mu.clamp(NU_MIN + INTENSITY_GAP, MU_MAX);
        x.nu = x.nu.clamp(NU_MIN, x.mu - INTENSITY_GAP);
        x
    }

    pub fn is_feasible(&self) -> bool {
        let p_omega = 1.0 - self.p_mu - self.p_nu;
        self.pr_z > 0.0
            && self.pr_z < 1.0
            && self.p_mu > 0.0
            && self.p_nu > 0.0
            && p_omega > 0.0
            && self.mu > self.nu
            && self.nu > 0.0
    }

    pub fn source(&self, variant: ProtocolVariant, n_pulses: f64) -> SourceParams {
        SourceParams::for_variant(variant, self.pr_z, self.p_mu, self.p_nu, self.mu, self.nu, n_pulses)
    }
}

/// Euclidean projection of (a, b) onto {a, b ≥ PROB_MIN, a + b ≤ PROB_MAX}.
fn project_pair(a: f64, b: f64) -> (f64, f64) {
    let (mut a, mut b) = (a.max(PROB_MIN), b.max(PROB_MIN));
    if a + b > PROB_MAX {
        let excess = 0.5 * (a + b - PROB_MAX);
        a -= excess;
        b -= excess;
        if a < PROB_MIN {
            (a, b) = (PROB_MIN, PROB_MAX - PROB_MIN);
        } else if b < PROB_MIN {
            (a, b) = (PROB_MAX - PROB_MIN, PROB_MIN);
        }
    }
    (a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    pub mu_starts: [f64; 3],
    pub nu_starts: [f64; 3],
    pub pr_z_starts: [f64; 3],
    pub p_mu_grid: [f64; 3],
    pub p_nu_grid: [f64; 3],
    /// Simplex iterations per start.
    pub iterations: usize,
    pub delta: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            mu_starts: [0.3, 0.5, 0.7],
            nu_starts: [0.05, 0.15, 0.25],
            pr_z_starts: [0.6, 0.8, 0.95],
            p_mu_grid: [0.3, 0.5, 0.7],
            p_nu_grid: [0.1, 0.25, 0.4],
            iterations: 200,
            delta: DEFAULT_RELAXATION,
        }
    }
}

/// Fixed inputs of one optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateProblem {
    pub variant: ProtocolVariant,
    pub channel: ChannelParams,
    pub security: SecurityParams,
    pub n_pulses: f64,
    pub mode: KeyMode,
}

impl RateProblem {
    /// Rate at `x`, 0 when the pipeline cannot produce a key there.
    pub fn rate(&self, x: &ParameterVector, delta: f64) -> f64 {
        let source = x.source(self.variant, self.n_pulses);
        match pipeline::decoy_rate(self.variant, &self.channel, &source, &self.security, self.mode, delta) {
            Ok(r) if r.rate.is_finite() => r.rate,
            _ => 0.0,
        }
    }

    /// Checks the fixed inputs once so that failures are not silently read as zero rates.
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.channel.validate()?;
        if self.mode == KeyMode::Finite {
            self.security.validate()?;
            if self.variant == ProtocolVariant::Bb84ThreeState {
                return Err(PipelineError::AsymptoticOnly(self.variant));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizedRate {
    pub params: ParameterVector,
    pub rate: f64,
    /// Best rate among the starting points, before any simplex steps.
    pub best_start_rate: f64,
    pub evaluations: usize,
}

fn better(a: (f64, [f64; 5]), b: (f64, [f64; 5])) -> bool {
    // Larger rate wins; equal rates go to the lexicographically smaller vector.
    match a.0.partial_cmp(&b.0) {
        Some(std::cmp::Ordering::Greater) => true,
        Some(std::cmp::Ordering::Less) => false,
        _ => a.1.iter().zip(b.1.iter()).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y),
    }
}

struct StartResult {
    best: (f64, [f64; 5]),
    start_rate: f64,
    evaluations: usize,
}

fn nelder_mead(
    f: &dyn Fn(&ParameterVector) -> f64,
    start: ParameterVector,
    iterations: usize,
    evaluations: &mut usize,
) -> (f64, ParameterVector) {
    // Minimize −rate.
    let mut eval = |x: [f64; 5]| -> ([f64; 5], f64) {
        let p = ParameterVector::from_array(x).projected();
        *evaluations += 1;
        (p.to_array(), -f(&p))
    };
    let x0 = start.projected().to_array();
    let steps = [0.05, 0.1, 0.05, 0.1 * x0[3], 0.25 * x0[4]];
    let mut simplex: Vec<([f64; 5], f64)> = vec![eval(x0)];
    for i in 0..5 {
        let mut x = x0;
        x[i] += steps[i];
        let (mut p, mut v) = eval(x);
        if p == x0 {
            // The step was projected away; go the other direction.
            x[i] = x0[i] - steps[i];
            (p, v) = eval(x);
        }
        simplex.push((p, v));
    }
    let order = |s: &mut Vec<([f64; 5], f64)>| {
        s.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal)));
    };
    let lerp = |a: &[f64; 5], b: &[f64; 5], t: f64| -> [f64; 5] { std::array::from_fn(|i| a[i] + t * (b[i] - a[i])) };
    for _ in 0..iterations {
        order(&mut simplex);
        let worst = simplex[5];
        let centroid: [f64; 5] = std::array::from_fn(|i| simplex[..5].iter().map(|(x, _)| x[i]).sum::<f64>() / 5.0);
        let reflected = eval(lerp(&centroid, &worst.0, -1.0));
        if reflected.1 < simplex[0].1 {
            let expanded = eval(lerp(&centroid, &worst.0, -2.0));
            simplex[5] = if expanded.1 < reflected.1 { expanded } else { reflected };
        } else if reflected.1 < simplex[4].1 {
            simplex[5] = reflected;
        } else {
            let contracted = if reflected.1 < worst.1 {
                eval(lerp(&centroid, &reflected.0, 0.5))
            } else {
                eval(lerp(&centroid, &worst.0, 0.5))
            };
            if contracted.1 < worst.1.min(reflected.1) {
                simplex[5] = contracted;
            } else {
                let best = simplex[0].0;
                for vertex in simplex.iter_mut().skip(1) {
                    *vertex = eval(lerp(&best, &vertex.0, 0.5));
                }
            }
        }
    }
    order(&mut simplex);
    (-simplex[0].1, ParameterVector::from_array(simplex[0].0))
}

fn run_start(
    problem: &RateProblem,
    settings: &OptimizerSettings,
    mu: f64,
    nu: f64,
    pr_z: f64,
) -> StartResult {
    let f = |x: &ParameterVector| problem.rate(x, settings.delta);
    let mut evaluations = 0;
    let mut best_start: Option<(f64, [f64; 5])> = None;
    for &p_mu in &settings.p_mu_grid {
        for &p_nu in &settings.p_nu_grid {
            if p_mu + p_nu > PROB_MAX {
                continue;
            }
            let x = ParameterVector { pr_z, p_mu, p_nu, mu, nu }.projected();
            let r = f(&x);
            evaluations += 1;
            let cand = (r, x.to_array());
            if best_start.is_none_or(|b| better(cand, b)) {
                best_start = Some(cand);
            }
        }
    }
    let start = best_start.expect("the (p_mu, p_nu) grid has a feasible point");
    let (rate, x) = nelder_mead(&f, ParameterVector::from_array(start.1), settings.iterations, &mut evaluations);
    let end = (rate, x.to_array());
    StartResult {
        best: if better(start, end) { start } else { end },
        start_rate: start.0,
        evaluations,
    }
}

/// Maximizes the key rate for `problem`.
///
/// Starts run in parallel; the reduction is deterministic because ties are
/// broken on the parameter vector, not on completion order. When no start
/// yields a positive rate the best vector found is still returned, with rate 0.
pub fn optimize_rate(problem: &RateProblem, settings: &OptimizerSettings) -> Result<OptimizedRate, PipelineError> {
    problem.validate()?;
    let mut starts = Vec::new();
    for &mu in &settings.mu_starts {
        for &nu in &settings.nu_starts {
            if nu >= mu {
                continue;
            }
            for &pr_z in &settings.pr_z_starts {
                starts.push((mu, nu, pr_z));
            }
        }
    }
    let results: Vec<StartResult> = starts
        .par_iter()
        .map(|&(mu, nu, pr_z)| run_start(problem, settings, mu, nu, pr_z))
        .collect();
    let mut best = results[0].best;
    let mut best_start_rate = f64::NEG_INFINITY;
    let mut evaluations = 0;
    for r in &results {
        if better(r.best, best) {
            best = r.best;
        }
        best_start_rate = best_start_rate.max(r.start_rate);
        evaluations += r.evaluations;
    }
    Ok(OptimizedRate {
        params: ParameterVector::from_array(best.1),
        rate: best.0.max(0.0),
        best_start_rate,
        evaluations,
    })
}
