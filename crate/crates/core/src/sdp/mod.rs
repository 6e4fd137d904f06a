//! Interior-point solver for conic programs over two-qubit density matrices.
//!
//! Two problem shapes are supported: extremizing Tr(Mρ), and minimizing
//! Σ_k Tr(M_k ρ)², each subject to affine constraints |Tr(A_j ρ) − b_j| ≤ δ
//! plus the implicit ρ ⪰ 0, Tr ρ = 1.
//!
//! ρ is written as (𝟙 + Σ_k x_k G_k)/4 over the 15 non-identity Pauli
//! products G_k, which eliminates the trace constraint. The equality rows are
//! then split: their null space is kept free, and their row space is rescaled
//! by δ so every slab becomes |h_j| < 1 with h_j = O(1). The resulting
//! problem is solved by barrier path following in three phases:
//!
//! 0. if the least-squares point violates a slab, minimize max_j |h_j|;
//! 1. if ρ is not positive definite, maximize s subject to ρ − s𝟙 ≻ 0;
//! 2. the actual objective, starting from 𝟙/4 when that point is feasible.

mod barrier;

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{pauli, tensor, trace_product, Axis, ComplexMatrix, Observable, TwoQubitState, C64};
use barrier::{add_logdet, add_slabs, is_pd, path_follow, pd_inverse, slabs_interior, Barrier, PathEnd, PathSettings};

/// Default constraint half-width δ.
pub const DEFAULT_RELAXATION: f64 = 1e-6;

const DIM: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Objective {
    /// Extremize Tr(Mρ).
    Linear { operator: Observable, sense: Sense },
    /// Minimize Σ_k Tr(M_k ρ)².
    SumOfSquares { terms: Vec<Observable> },
}

/// Tr(A ρ) = value, softened to |Tr(A ρ) − value| ≤ δ.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub operator: Observable,
    pub value: f64,
}

impl Constraint {
    pub fn new(operator: Observable, value: f64) -> Self {
        Self { operator, value }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub objective: Objective,
    pub constraints: Vec<Constraint>,
    /// Constraint half-width δ ≥ 0.
    pub relaxation: f64,
}

impl ConicProblem {
    pub fn new(objective: Objective, constraints: Vec<Constraint>) -> Self {
        Self {
            objective,
            constraints,
            relaxation: DEFAULT_RELAXATION,
        }
    }

    pub fn with_relaxation(mut self, delta: f64) -> Self {
        self.relaxation = delta;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the barrier gap ν/t falls below this value.
    pub gap_tolerance: f64,
    /// Cap on Newton steps across all phases.
    pub max_iterations: usize,
    /// Barrier-weight reduction per outer iteration (t ← t / factor).
    pub mu_factor: f64,
    /// Declare infeasibility when max λ_min(ρ) over the constraint set is below −threshold.
    pub infeasibility_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tolerance: 1e-8,
            max_iterations: 500,
            mu_factor: 0.2,
            infeasibility_threshold: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Bound on the optimum from the safe side: below it when minimizing,
    /// above it when maximizing.
    pub optimal_value: f64,
    /// Final iterate. `None` only when no feasible point was found.
    pub optimizer: Option<TwoQubitState>,
    pub status: SolveStatus,
    /// Barrier duality-gap bound ν/t at the final iterate.
    pub residual: f64,
    /// Newton steps taken over all phases.
    pub iterations: usize,
}

impl SolveReport {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Objective evaluated at the returned optimizer.
    pub fn objective_at_optimizer(&self, objective: &Objective) -> Option<f64> {
        self.optimizer.as_ref().map(|rho| evaluate_objective(objective, rho))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("sum-of-squares objective needs at least one term")]
    EmptyObjective,
    #[error("relaxation must be finite and nonnegative, got {0}")]
    InvalidRelaxation(f64),
    #[error("constraint {0} has a non-finite target value")]
    NonFiniteValue(usize),
    #[error("{0} requires a {1} objective")]
    ObjectiveMismatch(&'static str, &'static str),
}

/// Objective value Tr(Mρ) or Σ Tr(M_k ρ)² at ρ.
pub fn evaluate_objective(objective: &Objective, rho: &TwoQubitState) -> f64 {
    match objective {
        Objective::Linear { operator, .. } => operator.expectation(rho),
        Objective::SumOfSquares { terms } => terms.iter().map(|m| m.expectation(rho).powi(2)).sum(),
    }
}

/// Extremizes a linear functional.
pub fn solve_linear(problem: &ConicProblem, options: &SolverOptions) -> Result<SolveReport, SdpError> {
    if !matches!(problem.objective, Objective::Linear { .. }) {
        return Err(SdpError::ObjectiveMismatch("solve_linear", "linear"));
    }
    solve(problem, options)
}

/// Minimizes a sum of squared expectation values.
pub fn solve_min_sum_squares(problem: &ConicProblem, options: &SolverOptions) -> Result<SolveReport, SdpError> {
    if !matches!(problem.objective, Objective::SumOfSquares { .. }) {
        return Err(SdpError::ObjectiveMismatch("solve_min_sum_squares", "sum-of-squares"));
    }
    solve(problem, options)
}

/// Solves either problem shape.
pub fn solve(problem: &ConicProblem, options: &SolverOptions) -> Result<SolveReport, SdpError> {
    validate(problem)?;
    let Some(reduced) = Reduced::new(problem) else {
        return Ok(infeasible(0));
    };
    let mut budget = options.max_iterations;
    let used = |b: usize| options.max_iterations - b;

    let mut u = DVector::zeros(reduced.n);
    if reduced.slab_offsets.iter().any(|o| o.abs() >= 0.5) {
        match phase0(&reduced, options, &mut budget) {
            Phase0::Interior(w) => u = w,
            Phase0::Infeasible => return Ok(infeasible(used(budget))),
            Phase0::Exhausted => return Ok(unfinished(used(budget))),
        }
    }

    let mut shift = 0.0;
    if let Some(start) = reduced.identity_coordinates() {
        u = start;
    } else if !is_pd(&reduced.rho(&u)) {
        match phase1(&reduced, u, options, &mut budget) {
            Phase1::Interior(v) => u = v,
            Phase1::Boundary(v, s) => {
                u = v;
                shift = -s + 1e-10;
            }
            Phase1::Infeasible => return Ok(infeasible(used(budget))),
            Phase1::Exhausted => return Ok(unfinished(used(budget))),
        }
    }

    let (objective, maximize) = reduced.objective(&problem.objective);
    let cone = ConeBarrier {
        reduced: &reduced,
        objective: &objective,
        mode: ConeMode::Objective { shift },
    };
    let settings = PathSettings {
        t0: 1.0,
        mu_factor: options.mu_factor,
        tolerance: options.gap_tolerance,
    };
    let result = path_follow(&cone, u, &settings, &mut budget, |_, _| false);
    let inner = objective.value(&result.v);
    let bound = inner - result.gap;
    let status = match result.end {
        PathEnd::Converged | PathEnd::Stopped => SolveStatus::Optimal,
        // Stalling after the gap is already tiny means rounding, not failure.
        PathEnd::Stalled if result.gap < 1e3 * options.gap_tolerance => SolveStatus::Optimal,
        PathEnd::Stalled | PathEnd::Exhausted => SolveStatus::MaxIterations,
    };
    let rho = reduced.rho(&result.v);
    Ok(SolveReport {
        optimal_value: if maximize { -bound } else { bound },
        optimizer: Some(clean_state(rho, shift > 0.0)),
        status,
        residual: result.gap,
        iterations: used(budget),
    })
}

fn validate(problem: &ConicProblem) -> Result<(), SdpError> {
    if !(problem.relaxation.is_finite() && problem.relaxation >= 0.0) {
        return Err(SdpError::InvalidRelaxation(problem.relaxation));
    }
    if let Objective::SumOfSquares { terms } = &problem.objective {
        if terms.is_empty() {
            return Err(SdpError::EmptyObjective);
        }
    }
    if let Some(i) = problem.constraints.iter().position(|c| !c.value.is_finite()) {
        return Err(SdpError::NonFiniteValue(i));
    }
    Ok(())
}

fn infeasible(iterations: usize) -> SolveReport {
    SolveReport {
        optimal_value: f64::NAN,
        optimizer: None,
        status: SolveStatus::Infeasible,
        residual: f64::INFINITY,
        iterations,
    }
}

fn unfinished(iterations: usize) -> SolveReport {
    SolveReport {
        optimal_value: f64::NAN,
        optimizer: None,
        status: SolveStatus::MaxIterations,
        residual: f64::INFINITY,
        iterations,
    }
}

/// Symmetrizes ρ and, when the interior was empty or rounding left a tiny
/// negative eigenvalue, clips it back into the state space.
fn clean_state(rho: Matrix4<C64>, force_projection: bool) -> TwoQubitState {
    let herm = (rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    if !force_projection && eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return TwoQubitState::from_matrix4_unchecked(herm);
    }
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let mut out = Matrix4::<C64>::zeros();
    for (k, &l) in clipped.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        out += v * v.adjoint() * C64::new(l / total, 0.0);
    }
    TwoQubitState::from_matrix4_unchecked((out + out.adjoint()) * C64::new(0.5, 0.0))
}

/// The 15 non-identity Pauli products σ_a ⊗ σ_b, a, b ∈ {𝟙, X, Y, Z}.
pub fn pauli_basis() -> &'static [Matrix4<C64>; DIM] {
    static BASIS: OnceLock<[Matrix4<C64>; DIM]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let single = [
            ComplexMatrix::identity(2),
            pauli(Axis::X),
            pauli(Axis::Y),
            pauli(Axis::Z),
        ];
        let mut out = [Matrix4::zeros(); DIM];
        let mut k = 0;
        for (a, pa) in single.iter().enumerate() {
            for (b, pb) in single.iter().enumerate() {
                if a == 0 && b == 0 {
                    continue;
                }
                let m = tensor(pa, pb).expect("2x2 factors");
                out[k] = Matrix4::from_fn(|i, j| m.get(i, j));
                k += 1;
            }
        }
        out
    })
}

/// Pauli coordinates of Tr(Mρ): Tr(Mρ) = constant + coeffs·x.
fn affine_form(m: &Observable) -> (f64, DVector<f64>) {
    let basis = pauli_basis();
    let coeffs = DVector::from_iterator(DIM, basis.iter().map(|g| 0.25 * trace_product(m.matrix(), g)));
    (0.25 * m.trace(), coeffs)
}

/// Pauli coordinates of a state, x_k = Tr(G_k ρ).
pub fn pauli_coordinates(rho: &TwoQubitState) -> [f64; DIM] {
    let mut out = [0.0; DIM];
    for (o, g) in out.iter_mut().zip(pauli_basis()) {
        *o = trace_product(g, rho.matrix());
    }
    out
}

/// Objective expressed in reduced coordinates:
/// constant + linear·u + Σ_t (offsets_t + rows_t·u)².
struct ReducedObjective {
    constant: f64,
    linear: DVector<f64>,
    rows: DMatrix<f64>,
    offsets: DVector<f64>,
    hessian: DMatrix<f64>,
}

impl ReducedObjective {
    fn value(&self, u: &DVector<f64>) -> f64 {
        let n = self.linear.len();
        let u = u.rows(0, n);
        let r = &self.offsets + &self.rows * u;
        self.constant + self.linear.dot(&u) + r.norm_squared()
    }

    fn gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        let n = self.linear.len();
        let u = u.rows(0, n);
        let r = &self.offsets + &self.rows * u;
        &self.linear + self.rows.transpose() * r * 2.0
    }
}

/// The constraint system rewritten in reduced coordinates u, x = base + jac·u.
struct Reduced {
    n: usize,
    base: DVector<f64>,
    jac: DMatrix<f64>,
    rho0: Matrix4<C64>,
    dirs: Vec<Matrix4<C64>>,
    /// Number of leading coordinates that move the constrained directions.
    range_dim: usize,
    /// Slab rows over the leading `range_dim` coordinates.
    slab_rows: DMatrix<f64>,
    slab_offsets: DVector<f64>,
}

impl Reduced {
    /// Returns `None` when the equality system is inconsistent and δ = 0.
    fn new(problem: &ConicProblem) -> Option<Self> {
        let m = problem.constraints.len();
        let delta = problem.relaxation;
        let mut a = DMatrix::zeros(m, DIM);
        let mut rhs = DVector::zeros(m);
        for (j, c) in problem.constraints.iter().enumerate() {
            let (c0, coeffs) = affine_form(&c.operator);
            a.row_mut(j).copy_from(&coeffs.transpose());
            rhs[j] = c.value - c0;
        }

        let ata = a.transpose() * &a;
        let eig = SymmetricEigen::new(ata);
        let lmax = eig.eigenvalues.iter().fold(0.0_f64, |acc, &l| acc.max(l));
        let cutoff = 1e-10 * lmax.max(1.0);
        let (range, null): (Vec<usize>, Vec<usize>) = (0..DIM).partition(|&k| eig.eigenvalues[k] > cutoff);
        let r = range.len();
        let u_r = DMatrix::from_fn(DIM, r, |i, k| eig.eigenvectors[(i, range[k])]);
        let v = DMatrix::from_fn(DIM, null.len(), |i, k| eig.eigenvectors[(i, null[k])]);

        // Least-squares centre x_c = U_r Λ⁻¹ U_rᵀ Aᵀ rhs.
        let proj = u_r.transpose() * a.transpose() * &rhs;
        let scaled = DVector::from_fn(r, |k, _| proj[k] / eig.eigenvalues[range[k]]);
        let x_c = &u_r * scaled;
        let residual = &a * &x_c - &rhs;

        let (jac, range_dim, slab_rows, slab_offsets) = if delta > 0.0 {
            let mut jac = DMatrix::zeros(DIM, DIM);
            jac.view_mut((0, 0), (DIM, r)).copy_from(&(&u_r * delta));
            jac.view_mut((0, r), (DIM, DIM - r)).copy_from(&v);
            (jac, r, &a * &u_r, residual / delta)
        } else {
            if residual.amax() > 1e-9 {
                return None;
            }
            (v, 0, DMatrix::zeros(0, 0), DVector::zeros(0))
        };

        let basis = pauli_basis();
        let n = jac.ncols();
        let to_matrix = |coords: &[f64]| {
            let mut out = Matrix4::<C64>::zeros();
            for (c, g) in coords.iter().zip(basis) {
                out += g * C64::new(0.25 * c, 0.0);
            }
            out
        };
        let mut rho0 = to_matrix(x_c.as_slice());
        rho0 += Matrix4::identity() * C64::new(0.25, 0.0);
        let dirs = (0..n).map(|i| to_matrix(jac.column(i).as_slice())).collect();
        Some(Self {
            n,
            base: x_c,
            jac,
            rho0,
            dirs,
            range_dim,
            slab_rows,
            slab_offsets,
        })
    }

    fn rho(&self, u: &DVector<f64>) -> Matrix4<C64> {
        let mut out = self.rho0;
        for (i, d) in self.dirs.iter().enumerate() {
            out += d * C64::new(u[i], 0.0);
        }
        out
    }

    fn slab_values(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.slab_offsets + &self.slab_rows * u.rows(0, self.range_dim)
    }

    fn slabs_ok(&self, u: &DVector<f64>) -> bool {
        slabs_interior(&self.slab_values(u))
    }

    fn nu(&self) -> f64 {
        4.0 + 2.0 * self.slab_rows.nrows() as f64
    }

    /// Coordinates of 𝟙/4 if it is strictly feasible.
    fn identity_coordinates(&self) -> Option<DVector<f64>> {
        // jac has orthogonal columns; its pseudo-inverse is jacᵀ scaled per column.
        let target = -&self.base;
        let u = DVector::from_fn(self.n, |i, _| {
            let col = self.jac.column(i);
            col.dot(&target) / col.norm_squared()
        });
        let x = &self.base + &self.jac * &u;
        (x.amax() < 1e-12 && self.slabs_ok(&u)).then_some(u)
    }

    /// Objective in reduced coordinates, negated for maximization.
    fn objective(&self, objective: &Objective) -> (ReducedObjective, bool) {
        let (constant, linear, rows, offsets, maximize) = match objective {
            Objective::Linear { operator, sense } => {
                let (c0, q) = affine_form(operator);
                let sign = if *sense == Sense::Maximize { -1.0 } else { 1.0 };
                (
                    sign * (c0 + q.dot(&self.base)),
                    self.jac.transpose() * q * sign,
                    DMatrix::zeros(0, self.n),
                    DVector::zeros(0),
                    *sense == Sense::Maximize,
                )
            }
            Objective::SumOfSquares { terms } => {
                let mut rows = DMatrix::zeros(terms.len(), self.n);
                let mut offsets = DVector::zeros(terms.len());
                for (t, m) in terms.iter().enumerate() {
                    let (c0, q) = affine_form(m);
                    offsets[t] = c0 + q.dot(&self.base);
                    rows.row_mut(t).copy_from(&(self.jac.transpose() * q).transpose());
                }
                (0.0, DVector::zeros(self.n), rows, offsets, false)
            }
        };
        let hessian = rows.transpose() * &rows * 2.0;
        (
            ReducedObjective {
                constant,
                linear,
                rows,
                offsets,
                hessian,
            },
            maximize,
        )
    }
}

enum ConeMode {
    /// Variables (u, s); minimize −s subject to ρ(u) − s𝟙 ≻ 0.
    Feasibility,
    /// Variables u; minimize the objective subject to ρ(u) + shift·𝟙 ≻ 0.
    Objective { shift: f64 },
}

struct ConeBarrier<'a> {
    reduced: &'a Reduced,
    objective: &'a ReducedObjective,
    mode: ConeMode,
}

impl ConeBarrier<'_> {
    fn shifted(&self, v: &DVector<f64>) -> Matrix4<C64> {
        let u = v.rows(0, self.reduced.n).into_owned();
        let rho = self.reduced.rho(&u);
        let s = match self.mode {
            ConeMode::Feasibility => -v[self.reduced.n],
            ConeMode::Objective { shift } => shift,
        };
        rho + Matrix4::identity() * C64::new(s, 0.0)
    }
}

impl Barrier for ConeBarrier<'_> {
    fn dim(&self) -> usize {
        match self.mode {
            ConeMode::Feasibility => self.reduced.n + 1,
            ConeMode::Objective { .. } => self.reduced.n,
        }
    }

    fn nu(&self) -> f64 {
        self.reduced.nu()
    }

    fn objective(&self, v: &DVector<f64>) -> f64 {
        match self.mode {
            ConeMode::Feasibility => -v[self.reduced.n],
            ConeMode::Objective { .. } => self.objective.value(v),
        }
    }

    fn derivatives(&self, v: &DVector<f64>, t: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let dim = self.dim();
        let n = self.reduced.n;
        let s_inv = pd_inverse(&self.shifted(v))?;
        let values = self.reduced.slab_values(v);
        if !slabs_interior(&values) {
            return None;
        }
        let mut g = DVector::zeros(dim);
        let mut h = DMatrix::zeros(dim, dim);
        match self.mode {
            ConeMode::Feasibility => {
                g[n] = -t;
                let mut dirs = self.reduced.dirs.clone();
                dirs.push(-Matrix4::<C64>::identity());
                add_logdet(&s_inv, &dirs, &mut g, &mut h);
            }
            ConeMode::Objective { .. } => {
                g += self.objective.gradient(v) * t;
                h += &self.objective.hessian * t;
                add_logdet(&s_inv, &self.reduced.dirs, &mut g, &mut h);
            }
        }
        add_slabs(&self.reduced.slab_rows, &values, &mut g, &mut h);
        Some((g, h))
    }

    fn in_domain(&self, v: &DVector<f64>) -> bool {
        self.reduced.slabs_ok(v) && is_pd(&self.shifted(v))
    }
}

enum Phase1 {
    Interior(DVector<f64>),
    /// Feasible only up to the infeasibility threshold; carries λ_min ≤ 0.
    Boundary(DVector<f64>, f64),
    Infeasible,
    Exhausted,
}

fn phase1(reduced: &Reduced, u: DVector<f64>, options: &SolverOptions, budget: &mut usize) -> Phase1 {
    let n = reduced.n;
    let lmin = SymmetricEigen::new(reduced.rho(&u))
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    let mut v = DVector::zeros(n + 1);
    v.rows_mut(0, n).copy_from(&u);
    v[n] = lmin - 1.0;
    let unused = ReducedObjective {
        constant: 0.0,
        linear: DVector::zeros(0),
        rows: DMatrix::zeros(0, 0),
        offsets: DVector::zeros(0),
        hessian: DMatrix::zeros(0, 0),
    };
    let cone = ConeBarrier {
        reduced,
        objective: &unused,
        mode: ConeMode::Feasibility,
    };
    let settings = PathSettings {
        t0: 1.0,
        mu_factor: options.mu_factor,
        tolerance: 0.01 * options.infeasibility_threshold,
    };
    let threshold = options.infeasibility_threshold;
    let mut certified_infeasible = false;
    let result = path_follow(&cone, v, &settings, budget, |objective, gap| {
        let s = -objective;
        if s + gap < -threshold {
            certified_infeasible = true;
            return true;
        }
        s > 0.0 && s >= gap
    });
    let s = result.v[n];
    let u = result.v.rows(0, n).into_owned();
    if certified_infeasible {
        return Phase1::Infeasible;
    }
    match result.end {
        PathEnd::Stopped => Phase1::Interior(u),
        PathEnd::Converged | PathEnd::Stalled if s > 0.0 => Phase1::Interior(u),
        PathEnd::Converged | PathEnd::Stalled if s + result.gap >= -threshold => Phase1::Boundary(u, s),
        PathEnd::Converged | PathEnd::Stalled => Phase1::Infeasible,
        PathEnd::Exhausted => Phase1::Exhausted,
    }
}

/// LP over (w, τ): minimize τ subject to |h_j(w)| < τ.
struct SlabCentering<'a> {
    reduced: &'a Reduced,
}

impl SlabCentering<'_> {
    fn split(&self, v: &DVector<f64>) -> (DVector<f64>, f64) {
        let r = self.reduced.range_dim;
        let mut u = DVector::zeros(self.reduced.n);
        u.rows_mut(0, r).copy_from(&v.rows(0, r));
        (self.reduced.slab_values(&u), v[r])
    }
}

impl Barrier for SlabCentering<'_> {
    fn dim(&self) -> usize {
        self.reduced.range_dim + 1
    }

    fn nu(&self) -> f64 {
        2.0 * self.reduced.slab_rows.nrows() as f64
    }

    fn objective(&self, v: &DVector<f64>) -> f64 {
        v[self.reduced.range_dim]
    }

    fn derivatives(&self, v: &DVector<f64>, t: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        if !self.in_domain(v) {
            return None;
        }
        let r = self.reduced.range_dim;
        let (h, tau) = self.split(v);
        let rows = &self.reduced.slab_rows;
        let mut g = DVector::zeros(r + 1);
        let mut hess = DMatrix::zeros(r + 1, r + 1);
        g[r] = t;
        // −log(τ − h) − log(τ + h)
        let mut row = DVector::zeros(r + 1);
        for j in 0..rows.nrows() {
            for (sign, slack) in [(-1.0, tau - h[j]), (1.0, tau + h[j])] {
                for a in 0..r {
                    row[a] = sign * rows[(j, a)];
                }
                row[r] = 1.0;
                g -= &row / slack;
                hess += &row * row.transpose() / (slack * slack);
            }
        }
        Some((g, hess))
    }

    fn in_domain(&self, v: &DVector<f64>) -> bool {
        let (h, tau) = self.split(v);
        h.iter().all(|x| x.abs() < tau)
    }
}

enum Phase0 {
    Interior(DVector<f64>),
    Infeasible,
    Exhausted,
}

fn phase0(reduced: &Reduced, options: &SolverOptions, budget: &mut usize) -> Phase0 {
    let r = reduced.range_dim;
    let start_values = reduced.slab_values(&DVector::zeros(reduced.n));
    if r == 0 {
        // Every constraint row is constant in ρ; nothing to adjust.
        return if slabs_interior(&start_values) {
            Phase0::Interior(DVector::zeros(reduced.n))
        } else {
            Phase0::Infeasible
        };
    }
    let mut v = DVector::zeros(r + 1);
    v[r] = start_values.amax() + 1.0;
    let lp = SlabCentering { reduced };
    let settings = PathSettings {
        t0: 1.0,
        mu_factor: options.mu_factor,
        tolerance: 1e-9,
    };
    let mut certified_infeasible = false;
    let result = path_follow(&lp, v, &settings, budget, |tau, gap| {
        if tau - gap >= 1.0 {
            certified_infeasible = true;
            return true;
        }
        tau < 0.5
    });
    if certified_infeasible {
        return Phase0::Infeasible;
    }
    let mut u = DVector::zeros(reduced.n);
    u.rows_mut(0, r).copy_from(&result.v.rows(0, r));
    match result.end {
        PathEnd::Exhausted => Phase0::Exhausted,
        _ if reduced.slabs_ok(&u) => Phase0::Interior(u),
        _ => Phase0::Infeasible,
    }
}
