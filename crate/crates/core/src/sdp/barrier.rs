//! Damped-Newton path following for self-concordant barriers.
//!
//! The problems handed to this module are already reduced to a handful of
//! real coordinates. Each barrier knows its own domain, derivatives and
//! complexity parameter ν; [`path_follow`] only drives the central path.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix4, SymmetricEigen};

use crate::linalg::{trace_product, C64};

/// Newton decrement² below which a point counts as centered.
const CENTERING_TOL: f64 = 1e-10;
/// Decrement above which the step is damped by 1/(1+λ).
const DAMPING_THRESHOLD: f64 = 0.25;
const MIN_STEP: f64 = 1e-14;

pub(crate) trait Barrier {
    fn dim(&self) -> usize;
    /// Complexity parameter of the barrier.
    fn nu(&self) -> f64;
    /// Value of the (unbarriered) objective.
    fn objective(&self, v: &DVector<f64>) -> f64;
    /// Gradient and Hessian of `t·objective + barrier`, or `None` outside the domain.
    fn derivatives(&self, v: &DVector<f64>, t: f64) -> Option<(DVector<f64>, DMatrix<f64>)>;
    fn in_domain(&self, v: &DVector<f64>) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PathEnd {
    /// ν/t fell below the requested tolerance.
    Converged,
    /// The caller's stopping rule fired after a centering step.
    Stopped,
    /// The shared Newton-step budget ran out.
    Exhausted,
    /// No step direction kept the iterate in the domain.
    Stalled,
}

#[derive(Debug, Clone)]
pub(crate) struct PathResult {
    pub v: DVector<f64>,
    /// ν/t at the final iterate; bounds the suboptimality of a centered point.
    pub gap: f64,
    pub end: PathEnd,
}

pub(crate) struct PathSettings {
    pub t0: f64,
    pub mu_factor: f64,
    pub tolerance: f64,
}

/// Follows the central path from the strictly feasible `v0`.
///
/// `stop(objective, gap)` is consulted after every completed centering;
/// returning `true` ends the run with [`PathEnd::Stopped`].
pub(crate) fn path_follow<B: Barrier>(
    barrier: &B,
    v0: DVector<f64>,
    settings: &PathSettings,
    budget: &mut usize,
    mut stop: impl FnMut(f64, f64) -> bool,
) -> PathResult {
    let nu = barrier.nu();
    let mut t = settings.t0;
    let mut v = v0;
    loop {
        let gap = nu / t;
        match center(barrier, &mut v, t, budget) {
            Ok(()) => {}
            Err(end) => return PathResult { v, gap, end },
        }
        if stop(barrier.objective(&v), gap) {
            return PathResult { v, gap, end: PathEnd::Stopped };
        }
        if gap < settings.tolerance {
            return PathResult { v, gap, end: PathEnd::Converged };
        }
        t /= settings.mu_factor;
    }
}

fn center<B: Barrier>(barrier: &B, v: &mut DVector<f64>, t: f64, budget: &mut usize) -> Result<(), PathEnd> {
    loop {
        let (g, h) = barrier.derivatives(v, t).ok_or(PathEnd::Stalled)?;
        let step = newton_direction(h, &g);
        let lambda2 = -g.dot(&step);
        if !lambda2.is_finite() {
            return Err(PathEnd::Stalled);
        }
        if lambda2 <= CENTERING_TOL {
            return Ok(());
        }
        if *budget == 0 {
            return Err(PathEnd::Exhausted);
        }
        *budget -= 1;
        let lambda = lambda2.max(0.0).sqrt();
        let mut alpha = if lambda > DAMPING_THRESHOLD { 1.0 / (1.0 + lambda) } else { 1.0 };
        let mut trial = &*v + &step * alpha;
        while !barrier.in_domain(&trial) {
            alpha *= 0.5;
            if alpha < MIN_STEP {
                return Err(PathEnd::Stalled);
            }
            trial = &*v + &step * alpha;
        }
        if trial == *v {
            // Step below floating resolution: as centered as it will get.
            return Ok(());
        }
        *v = trial;
    }
}

/// Solves H·d = −g, falling back to an eigenvalue-clamped pseudo-inverse when
/// Cholesky fails on a numerically indefinite Hessian.
fn newton_direction(h: DMatrix<f64>, g: &DVector<f64>) -> DVector<f64> {
    let rhs = -g;
    if let Some(chol) = Cholesky::new(h.clone()) {
        return chol.solve(&rhs);
    }
    let eig = SymmetricEigen::new(h);
    let max = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let floor = max * 1e-14;
    let coeffs = eig.eigenvectors.transpose() * rhs;
    let scaled = DVector::from_iterator(
        coeffs.len(),
        coeffs
            .iter()
            .zip(eig.eigenvalues.iter())
            .map(|(c, &l)| if l > floor { c / l } else { 0.0 }),
    );
    eig.eigenvectors * scaled
}

/// Cholesky factor L (S = L L†) of a Hermitian matrix, `None` unless S ≻ 0.
///
/// nalgebra's complex Cholesky takes square roots in the complex field and
/// so does not reject indefinite input; the pivots are checked here instead.
fn hermitian_cholesky(s: &Matrix4<C64>) -> Option<Matrix4<C64>> {
    let mut l = Matrix4::<C64>::zeros();
    for j in 0..4 {
        let mut d = s[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0 && d.is_finite()) {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in j + 1..4 {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = v / ljj;
        }
    }
    Some(l)
}

/// Inverse of a Hermitian positive-definite 4×4 matrix, `None` if not PD.
pub(crate) fn pd_inverse(s: &Matrix4<C64>) -> Option<Matrix4<C64>> {
    let l = hermitian_cholesky(s)?;
    let l_inv = l.try_inverse()?;
    let inv = l_inv.adjoint() * l_inv;
    if inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

pub(crate) fn is_pd(s: &Matrix4<C64>) -> bool {
    hermitian_cholesky(s).is_some()
}

/// Adds the gradient and Hessian of −log det S to (g, h), where
/// ∂S/∂v_i = dirs[i].
pub(crate) fn add_logdet(
    s_inv: &Matrix4<C64>,
    dirs: &[Matrix4<C64>],
    g: &mut DVector<f64>,
    h: &mut DMatrix<f64>,
) {
    let b: Vec<Matrix4<C64>> = dirs.iter().map(|d| s_inv * d).collect();
    for i in 0..b.len() {
        g[i] -= b[i].trace().re;
        for j in 0..=i {
            let hij = trace_product(&b[i], &b[j]);
            h[(i, j)] += hij;
            if i != j {
                h[(j, i)] += hij;
            }
        }
    }
}

/// Adds the gradient and Hessian of −Σ log(1 − h_j²) with h = rows·v + offsets.
pub(crate) fn add_slabs(
    rows: &DMatrix<f64>,
    values: &DVector<f64>,
    g: &mut DVector<f64>,
    h: &mut DMatrix<f64>,
) {
    let cols = rows.ncols();
    for j in 0..rows.nrows() {
        let hj = values[j];
        let denom = 1.0 - hj * hj;
        let d1 = 2.0 * hj / denom;
        let d2 = 2.0 * (1.0 + hj * hj) / (denom * denom);
        for a in 0..cols {
            let ra = rows[(j, a)];
            if ra == 0.0 {
                continue;
            }
            g[a] += d1 * ra;
            for b in 0..cols {
                h[(a, b)] += d2 * ra * rows[(j, b)];
            }
        }
    }
}

/// Slab values strictly inside (−1, 1)?
pub(crate) fn slabs_interior(values: &DVector<f64>) -> bool {
    values.iter().all(|h| h.abs() < 1.0)
}
