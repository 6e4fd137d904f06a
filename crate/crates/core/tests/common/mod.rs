//! Shared test helpers: a brute-force SDP oracle and random instances.
//!
//! The oracle works directly on 4×4 Hermitian matrices. Equality constraints
//! go into an augmented Lagrangian; each subproblem is solved by accelerated
//! projected gradient, projecting onto {ρ ⪰ 0, Tr ρ = 1} through an
//! eigendecomposition and a simplex projection of the eigenvalues.

#![allow(dead_code)]

use nalgebra::Matrix4;
use num_complex::Complex64 as C64;
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;

use rfiqkd::linalg::{eigenstate, Axis, Observable};
use rfiqkd::rfi::error_operator;
use rfiqkd::sdp::{ConicProblem, Constraint, Objective, Sense};

pub type M4 = Matrix4<C64>;

pub fn inner(a: &M4, b: &M4) -> f64 {
    (a.adjoint() * b).trace().re
}

fn project_simplex(v: [f64; 4]) -> [f64; 4] {
    let mut u = v;
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.map(|x| (x - theta).max(0.0))
}

/// Nearest density matrix in Frobenius norm.
pub fn project_density(h: &M4) -> M4 {
    let h = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let lam = project_simplex([eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2], eig.eigenvalues[3]]);
    let v = eig.eigenvectors;
    let d = Matrix4::from_diagonal(&nalgebra::Vector4::from_iterator(lam.iter().map(|&l| C64::new(l, 0.0))));
    v * d * v.adjoint()
}

#[derive(Clone)]
#[allow(clippy::large_enum_variant)]
pub enum OracleObjective {
    Linear { op: M4, maximize: bool },
    SumOfSquares(Vec<M4>),
}

#[derive(Clone)]
pub struct Oracle {
    pub objective: OracleObjective,
    pub constraints: Vec<(M4, f64)>,
}

pub struct OracleResult {
    pub value: f64,
    pub rho: M4,
    pub max_residual: f64,
}

impl Oracle {
    /// Objective value in the problem's own sense.
    pub fn value(&self, rho: &M4) -> f64 {
        match &self.objective {
            OracleObjective::Linear { op, .. } => inner(op, rho),
            OracleObjective::SumOfSquares(terms) => terms.iter().map(|m| inner(m, rho).powi(2)).sum(),
        }
    }

    /// Gradient of the objective written as a minimization.
    fn gradient(&self, rho: &M4) -> M4 {
        match &self.objective {
            OracleObjective::Linear { op, maximize } => {
                if *maximize {
                    -op
                } else {
                    *op
                }
            }
            OracleObjective::SumOfSquares(terms) => {
                terms.iter().fold(M4::zeros(), |acc, m| acc + m * C64::new(2.0 * inner(m, rho), 0.0))
            }
        }
    }

    fn lipschitz(&self) -> f64 {
        match &self.objective {
            OracleObjective::Linear { .. } => 0.0,
            OracleObjective::SumOfSquares(terms) => 2.0 * terms.iter().map(|m| inner(m, m)).sum::<f64>(),
        }
    }

    fn residuals(&self, rho: &M4) -> Vec<f64> {
        self.constraints.iter().map(|(a, b)| inner(a, rho) - b).collect()
    }

    pub fn solve(&self) -> OracleResult {
        let penalty = 20.0;
        let lip = self.lipschitz() + penalty * self.constraints.iter().map(|(a, _)| inner(a, a)).sum::<f64>();
        let step = 1.0 / lip.max(1.0);
        let mut multipliers = vec![0.0; self.constraints.len()];
        let mut rho = M4::identity() * C64::new(0.25, 0.0);
        for outer in 0..400 {
            let mut y = rho;
            let mut t = 1.0f64;
            for _ in 0..400 {
                let r = self.residuals(&y);
                let mut g = self.gradient(&y);
                for ((a, _), (ri, li)) in self.constraints.iter().zip(r.iter().zip(&multipliers)) {
                    g += a * C64::new(li + penalty * ri, 0.0);
                }
                let next = project_density(&(y - g * C64::new(step, 0.0)));
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                y = next + (next - rho) * C64::new((t - 1.0) / t_next, 0.0);
                rho = next;
                t = t_next;
            }
            let r = self.residuals(&rho);
            for (li, ri) in multipliers.iter_mut().zip(&r) {
                *li += penalty * ri;
            }
            if r.iter().all(|x| x.abs() < 1e-10) && outer > 20 {
                break;
            }
        }
        let max_residual = self.residuals(&rho).iter().fold(0.0f64, |m, r| m.max(r.abs()));
        OracleResult { value: self.value(&rho), rho, max_residual }
    }
}

/// A full-rank random density matrix.
pub fn random_density(rng: &mut StdRng) -> M4 {
    let g = M4::from_fn(|_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let rho = g * g.adjoint();
    let tr = rho.trace().re;
    rho / C64::new(tr, 0.0)
}

fn random_axis(rng: &mut StdRng) -> Axis {
    Axis::ALL[rng.random_range(0..3)]
}

/// An operator of the kind that appears in the protocol constraints.
pub fn random_constraint_operator(rng: &mut StdRng) -> Observable {
    match rng.random_range(0..3) {
        0 => {
            let alice = eigenstate(random_axis(rng), rng.random_range(0..2));
            let beta = rng.random_range(0.0..std::f64::consts::PI);
            let bob = eigenstate(random_axis(rng), rng.random_range(0..2)).rotated_about_z(beta);
            Observable::projector_product(&alice, &bob)
        }
        1 => {
            use Axis::*;
            let pairs = [(Z, Z), (X, X), (X, Y), (Y, X), (Y, Y)];
            let (a, b) = pairs[rng.random_range(0..pairs.len())];
            error_operator(a, b)
        }
        _ => Observable::pauli_product(random_axis(rng), random_axis(rng)),
    }
}

pub struct Instance {
    pub problem: ConicProblem,
    pub oracle: Oracle,
    pub description: String,
}

/// A feasible instance: constraints are evaluated on a random full-rank state.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = StdRng::seed_from_u64(seed);
    let rho0 = random_density(&mut rng);
    let m = rng.random_range(1..=6);
    let mut constraints = Vec::new();
    let mut oracle_constraints = Vec::new();
    for _ in 0..m {
        let op = random_constraint_operator(&mut rng);
        let b = inner(op.matrix(), &rho0);
        oracle_constraints.push((*op.matrix(), b));
        constraints.push(Constraint::new(op, b));
    }
    let (objective, oracle_objective, kind) = if rng.random_bool(0.5) {
        let op = random_constraint_operator(&mut rng);
        let maximize = rng.random_bool(0.5);
        let sense = if maximize { Sense::Maximize } else { Sense::Minimize };
        let o = OracleObjective::Linear { op: *op.matrix(), maximize };
        (Objective::Linear { operator: op, sense }, o, if maximize { "max" } else { "min" })
    } else {
        let k = rng.random_range(1..=4);
        let terms: Vec<Observable> = (0..k).map(|_| Observable::pauli_product(random_axis(&mut rng), random_axis(&mut rng))).collect();
        let o = OracleObjective::SumOfSquares(terms.iter().map(|t| *t.matrix()).collect());
        (Objective::SumOfSquares { terms }, o, "sum-of-squares")
    };
    Instance {
        problem: ConicProblem::new(objective, constraints),
        oracle: Oracle { objective: oracle_objective, constraints: oracle_constraints },
        description: format!("seed {seed}: {kind} with {m} constraints"),
    }
}
