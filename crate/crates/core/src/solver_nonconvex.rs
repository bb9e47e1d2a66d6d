//! Local search for the overlapping regime (`0 ∈ int U`), where the unit-norm
//! constraint cannot be relaxed and the problem is non-convex.
//!
//! Each outer step linearizes `‖w‖² = 1` at the current unit direction `w̃`
//! and maximizes the concave support function over the hyperplane
//! `w̃ᵀw = 1`; the maximizer is renormalized and becomes the next `w̃`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{RcmError, Result};
use crate::linalg::{orthogonal_complement, sym_eig, SymMatrix, Vector};
use crate::solver_convex::{nearest_point, unit};
use crate::uncertainty::{PairSet, UncertaintySet};

/// Values or iterates beyond this mean the subproblem has no maximum.
const UNBOUNDED_GUARD: f64 = 1e12;
/// Sufficient-increase constant of the backtracking line search.
const ARMIJO: f64 = 1e-4;
/// Loosest inner tolerance, used at the first outer iteration.
const INNER_TOL_START: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialDirection {
    /// Normalized difference of the set centers.
    MeanDifference,
    Given(Vector),
    RandomSeeded(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSearchConfig {
    /// Stop once `‖w̃_t − ŵ_t‖ ≤ epsilon`.
    pub epsilon: f64,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub inner_max_steps: usize,
    pub initial: InitialDirection,
}

impl Default for LocalSearchConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_outer: 10_000,
            inner_tol: 1e-7,
            inner_max_steps: 5_000,
            initial: InitialDirection::MeanDifference,
        }
    }
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub w_tilde: Vector,
    pub w_hat: Vector,
    pub g_tilde: f64,
    pub g_hat: f64,
    /// `‖w̃_t − ŵ_t‖`.
    pub step: f64,
    pub inner_steps: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemResult {
    pub w_hat: Vector,
    pub value: f64,
    pub steps: usize,
    /// Norm of the aggregated supergradient at exit.
    pub stationarity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSearchResult {
    pub w: Vector,
    pub value: f64,
    pub trace: SolveTrace,
    pub converged: bool,
}

/// Maximizes `g` over `{w : w̃ᵀw = 1}` using the configured inner tolerance.
pub fn linearized_subproblem(
    pair: &PairSet,
    w_tilde: &Vector,
    cfg: &LocalSearchConfig,
) -> Result<SubproblemResult> {
    solve_subproblem(pair, w_tilde, cfg.inner_tol, cfg.inner_max_steps)
}

fn solve_subproblem(
    pair: &PairSet,
    w_tilde: &Vector,
    tol: f64,
    max_steps: usize,
) -> Result<SubproblemResult> {
    let norm = w_tilde.norm();
    if (norm - 1.0).abs() > 1e-10 || !norm.is_finite() {
        return Err(RcmError::InvalidDirection(norm));
    }
    let basis = orthogonal_complement(w_tilde);
    let k = basis.ncols();

    // Supergradient of z ↦ g(w̃ + Nz) is Nᵀx(w).
    let eval = |z: &Vector| -> Result<(f64, Vector)> {
        let w = w_tilde + &basis * z;
        let s = pair.support_min(&w)?;
        Ok((s.value, basis.transpose() * s.minimizer))
    };

    let mut z = Vector::zeros(k);
    let (mut value, p0) = eval(&z)?;
    if value > 0.0 {
        return Err(RcmError::SubproblemUnbounded);
    }
    if k == 0 {
        return Ok(SubproblemResult {
            w_hat: w_tilde.clone(),
            value,
            steps: 0,
            stationarity: 0.0,
        });
    }

    let bundle_cap = 2 * k + 4;
    let mut bundle = vec![p0];
    let mut step = 1.0;
    let mut stationarity = f64::INFINITY;
    let mut steps = 0;
    while steps < max_steps {
        let dir = min_norm_combination(&bundle)?;
        stationarity = dir.norm();
        if stationarity <= tol {
            break;
        }
        let u = &dir / stationarity;
        let scale = 1.0 + z.norm();
        if step < 1e-15 * scale {
            break;
        }
        steps += 1;
        let trial = &z + &u * step;
        let (trial_value, trial_grad) = eval(&trial)?;
        if trial_value > 0.0 || trial_value > UNBOUNDED_GUARD || trial.norm() > UNBOUNDED_GUARD {
            return Err(RcmError::SubproblemUnbounded);
        }
        if trial_value >= value + ARMIJO * step * stationarity {
            z = trial;
            value = trial_value;
            bundle.clear();
            bundle.push(trial_grad);
            step *= 2.0;
        } else {
            // Probe just beyond z along u to pick up pieces active near z.
            let probe_radius = (1e-9 * scale).min(step * 0.5);
            let (_, probe_grad) = eval(&(&z + &u * probe_radius))?;
            if !bundle.contains(&probe_grad) {
                if bundle.len() >= bundle_cap {
                    bundle.remove(1);
                }
                bundle.push(probe_grad);
            }
            step *= 0.5;
        }
    }

    Ok(SubproblemResult {
        w_hat: w_tilde + &basis * z,
        value,
        steps,
        stationarity,
    })
}

/// Minimum-norm point of the convex hull of a few vectors.
fn min_norm_combination(points: &[Vector]) -> Result<Vector> {
    if points.len() == 1 {
        return Ok(points[0].clone());
    }
    let scale = points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(points[0].clone());
    }
    let hull = PairSet::direct(UncertaintySet::convex_hull(points.to_vec())?);
    let r = nearest_point(&hull, 1e-10 * scale, 10_000)?;
    Ok(r.x_star)
}

fn initial_direction(pair: &PairSet, rule: &InitialDirection) -> Result<Vector> {
    let d = pair.dim();
    let w = match rule {
        InitialDirection::MeanDifference => {
            let c = pair.center_difference();
            if c.norm() > 0.0 {
                c
            } else {
                random_unit(d, 0)
            }
        }
        InitialDirection::Given(w) => {
            if w.len() != d {
                return Err(RcmError::DimensionMismatch {
                    expected: d,
                    found: w.len(),
                });
            }
            w.clone()
        }
        InitialDirection::RandomSeeded(seed) => random_unit(d, *seed),
    };
    let n = w.norm();
    if !(n > 0.0 && n.is_finite()) {
        return Err(RcmError::InvalidDirection(n));
    }
    Ok(unit(&w))
}

/// Uniform random unit vector (Box-Muller normals, normalized).
pub fn random_unit(d: usize, seed: u64) -> Vector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_unit_with(&mut rng, d)
}

fn random_unit_with<R: Rng>(rng: &mut R, d: usize) -> Vector {
    loop {
        let v = Vector::from_fn(d, |_, _| {
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        });
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Runs the linearized local search from the configured initial direction.
/// When `max_outer` is exhausted the last iterate is returned with
/// `converged = false`.
pub fn local_search(pair: &PairSet, cfg: &LocalSearchConfig) -> Result<LocalSearchResult> {
    if !(cfg.epsilon > 0.0) {
        return Err(RcmError::InvalidParameter(format!(
            "epsilon = {} must be > 0",
            cfg.epsilon
        )));
    }
    let mut w = initial_direction(pair, &cfg.initial)?;
    let mut trace = SolveTrace::default();
    let mut inner_tol = INNER_TOL_START.max(cfg.inner_tol);
    for t in 0..cfg.max_outer {
        let g_tilde = pair.g(&w)?;
        let mut sub = solve_subproblem(pair, &w, inner_tol, cfg.inner_max_steps)?;
        let mut step = (&w - &sub.w_hat).norm();
        if step <= cfg.epsilon && inner_tol > cfg.inner_tol {
            // Confirm the fixed point at full inner accuracy.
            inner_tol = cfg.inner_tol;
            sub = solve_subproblem(pair, &w, inner_tol, cfg.inner_max_steps)?;
            step = (&w - &sub.w_hat).norm();
        }
        trace.records.push(TraceRecord {
            iteration: t,
            w_tilde: w.clone(),
            w_hat: sub.w_hat.clone(),
            g_tilde,
            g_hat: sub.value,
            step,
            inner_steps: sub.steps,
        });
        if step <= cfg.epsilon {
            return Ok(LocalSearchResult {
                w,
                value: g_tilde,
                trace,
                converged: true,
            });
        }
        w = unit(&sub.w_hat);
        inner_tol = (inner_tol * 0.1).max(cfg.inner_tol);
    }
    let value = pair.g(&w)?;
    Ok(LocalSearchResult {
        w,
        value,
        trace,
        converged: false,
    })
}

/// Hessian of `g` for ellipsoidal pairs:
/// `Σ_classes −κ (Σ/‖Sw‖ − (Σw)(Σw)ᵀ/‖Sw‖³)`.
pub fn hessian_g(pair: &PairSet, w: &Vector) -> Result<SymMatrix> {
    let terms: Vec<(&SymMatrix, f64)> = match pair {
        PairSet::Pair { plus, minus } => vec![ellipsoid_parts(plus)?, ellipsoid_parts(minus)?],
        PairSet::Direct { diff } => vec![ellipsoid_parts(diff)?],
    };
    let d = pair.dim();
    if w.len() != d {
        return Err(RcmError::DimensionMismatch {
            expected: d,
            found: w.len(),
        });
    }
    let mut h = DMatrix::zeros(d, d);
    for (sqrt_cov, kappa) in terms {
        if kappa == 0.0 {
            continue;
        }
        let s = sqrt_cov.as_matrix();
        let sw = s * w;
        let n = sw.norm();
        if n <= 1e-10 {
            return Err(RcmError::NotDifferentiable);
        }
        let sigma = s * s;
        let sigma_w = &sigma * w;
        h -= (sigma / n - &sigma_w * sigma_w.transpose() / (n * n * n)) * kappa;
    }
    SymMatrix::new((&h + h.transpose()) * 0.5)
}

fn ellipsoid_parts(set: &UncertaintySet) -> Result<(&SymMatrix, f64)> {
    match set {
        UncertaintySet::Ellipsoid {
            sqrt_cov, radius, ..
        }
        | UncertaintySet::SummedEllipsoid {
            sqrt_cov, radius, ..
        } => Ok((sqrt_cov, *radius)),
        _ => Err(RcmError::InvalidParameter(
            "Hessian is only available for ellipsoidal sets".into(),
        )),
    }
}

/// Largest eigenvalue of the Hessian restricted to the tangent space `w⊥`.
/// The full Hessian always has `w` in its null space (g is positively
/// homogeneous), so only tangent curvature is informative.
pub fn tangent_max_eigenvalue(hessian: &SymMatrix, w: &Vector) -> Result<Option<f64>> {
    let basis = orthogonal_complement(&unit(w));
    if basis.ncols() == 0 {
        return Ok(None);
    }
    let reduced = SymMatrix::new(basis.transpose() * hessian.as_matrix() * &basis)?;
    let eig = sym_eig(&reduced);
    Ok(eig.eigenvalues.iter().copied().last())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    /// `max g(w) − g(w*)` over the sampled unit directions.
    pub max_violation: f64,
    /// Second-order sufficient test (tangent max-eigenvalue below `g(w*)`),
    /// for differentiable ellipsoidal pairs only.
    pub hessian_test: Option<bool>,
    pub g_star: f64,
}

/// Samples `n` unit vectors within angle `delta` of `w_star` and reports the
/// largest improvement of `g` found.
pub fn local_optimality_check(
    pair: &PairSet,
    w_star: &Vector,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<OptimalityReport> {
    let norm = w_star.norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(RcmError::InvalidDirection(norm));
    }
    let g_star = pair.g(w_star)?;
    let d = w_star.len();
    let basis = orthogonal_complement(w_star);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_violation = f64::NEG_INFINITY;
    for _ in 0..n_samples {
        let w = if d == 1 {
            w_star.clone()
        } else {
            let u = &basis * random_unit_with(&mut rng, d - 1);
            let angle = delta * rng.random::<f64>();
            w_star * angle.cos() + u * angle.sin()
        };
        max_violation = max_violation.max(pair.g(&w)? - g_star);
    }
    let hessian_test = match hessian_g(pair, w_star) {
        Ok(h) => tangent_max_eigenvalue(&h, w_star)?.map(|lmax| lmax < g_star),
        Err(_) => None,
    };
    Ok(OptimalityReport {
        max_violation,
        hessian_test,
        g_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn ball() -> PairSet {
        PairSet::direct(
            UncertaintySet::summed_ellipsoid(v(&[0.5, 0.0]), SymMatrix::identity(2), 1.0).unwrap(),
        )
    }

    #[test]
    fn subproblem_ball_tilted() {
        let cfg = LocalSearchConfig::default();
        let r = linearized_subproblem(&ball(), &v(&[0.0, 1.0]), &cfg).unwrap();
        let want = v(&[1.0 / 3f64.sqrt(), 1.0]);
        assert!((r.w_hat - want).amax() < 1e-6);
        // 0.5/√3 − √(4/3)
        assert!((r.value - (0.5 / 3f64.sqrt() - (4.0f64 / 3.0).sqrt())).abs() < 1e-10);
    }

    #[test]
    fn subproblem_fixed_point() {
        let cfg = LocalSearchConfig::default();
        let r = linearized_subproblem(&ball(), &v(&[1.0, 0.0]), &cfg).unwrap();
        assert!((r.w_hat - v(&[1.0, 0.0])).amax() < 1e-7);
    }

    #[test]
    fn subproblem_one_dimensional() {
        let pair = PairSet::pair(
            UncertaintySet::convex_hull(vec![v(&[-1.0]), v(&[3.0])]).unwrap(),
            UncertaintySet::convex_hull(vec![v(&[-3.0]), v(&[1.0])]).unwrap(),
        )
        .unwrap();
        let r = linearized_subproblem(&pair, &v(&[1.0]), &LocalSearchConfig::default()).unwrap();
        assert_eq!(r.w_hat, v(&[1.0]));
        assert_eq!(r.value, -2.0);
    }

    #[test]
    fn subproblem_rejects_non_unit() {
        assert!(matches!(
            linearized_subproblem(&ball(), &v(&[2.0, 0.0]), &LocalSearchConfig::default()),
            Err(RcmError::InvalidDirection(_))
        ));
    }

    #[test]
    fn subproblem_detects_separated_sets() {
        let pair = PairSet::direct(
            UncertaintySet::summed_ellipsoid(v(&[3.0, 0.0]), SymMatrix::identity(2), 1.0).unwrap(),
        );
        assert_eq!(
            linearized_subproblem(&pair, &v(&[0.0, 1.0]), &LocalSearchConfig::default()),
            Err(RcmError::SubproblemUnbounded)
        );
    }

    #[test]
    fn local_search_ball() {
        let cfg = LocalSearchConfig {
            initial: InitialDirection::Given(v(&[0.0, 1.0])),
            ..Default::default()
        };
        let r = local_search(&ball(), &cfg).unwrap();
        assert!(r.converged);
        assert!((r.w.clone() - v(&[1.0, 0.0])).amax() < 1e-5);
        assert!((r.value + 0.5).abs() < 1e-9);
        for rec in &r.trace.records {
            assert!(rec.w_hat.norm() >= 1.0 - 1e-12);
            assert!(rec.g_tilde < 0.0);
        }
        for pair in r.trace.records.windows(2) {
            assert!(pair[1].g_tilde > pair[0].g_tilde - 1e-12);
        }
    }

    #[test]
    fn local_search_fixed_start() {
        let cfg = LocalSearchConfig {
            initial: InitialDirection::Given(v(&[1.0, 0.0])),
            ..Default::default()
        };
        let r = local_search(&ball(), &cfg).unwrap();
        assert_eq!(r.w, v(&[1.0, 0.0]));
        assert!(r.trace.records[0].step < 1e-7);
        assert_eq!(r.trace.records.last().unwrap().w_tilde, v(&[1.0, 0.0]));
    }

    #[test]
    fn local_search_1d_hulls() {
        let pair = PairSet::pair(
            UncertaintySet::convex_hull(vec![v(&[-1.0]), v(&[3.0])]).unwrap(),
            UncertaintySet::convex_hull(vec![v(&[-3.0]), v(&[1.0])]).unwrap(),
        )
        .unwrap();
        let r = local_search(&pair, &LocalSearchConfig::default()).unwrap();
        assert_eq!(r.w, v(&[1.0]));
        assert_eq!(r.value, -2.0);
    }

    #[test]
    fn local_search_rejects_zero_epsilon() {
        let cfg = LocalSearchConfig {
            epsilon: 0.0,
            ..Default::default()
        };
        assert!(local_search(&ball(), &cfg).is_err());
    }

    #[test]
    fn hessian_unit_ball() {
        let h = hessian_g(&ball(), &v(&[1.0, 0.0])).unwrap();
        assert!((h.as_matrix() - SymMatrix::from_diagonal(&[0.0, -1.0]).as_matrix()).amax() < 1e-15);
        let zero = PairSet::direct(
            UncertaintySet::summed_ellipsoid(v(&[0.5, 0.0]), SymMatrix::identity(2), 0.0).unwrap(),
        );
        let h = hessian_g(&zero, &v(&[0.3, 0.4])).unwrap();
        assert_eq!(h.amax(), 0.0);
    }

    #[test]
    fn hessian_not_differentiable() {
        let pair = PairSet::direct(
            UncertaintySet::summed_ellipsoid(
                v(&[0.5, 0.0]),
                SymMatrix::from_diagonal(&[1.0, 0.0]),
                1.0,
            )
            .unwrap(),
        );
        assert_eq!(
            hessian_g(&pair, &v(&[0.0, 1.0])),
            Err(RcmError::NotDifferentiable)
        );
    }

    #[test]
    fn optimality_check_ball() {
        let r = local_optimality_check(&ball(), &v(&[1.0, 0.0]), 0.05, 1000, 1).unwrap();
        assert!(r.max_violation <= 1e-8);
        assert_eq!(r.hessian_test, Some(true));
        let r = local_optimality_check(&ball(), &v(&[0.0, 1.0]), 0.05, 1000, 1).unwrap();
        assert!(r.max_violation > 0.0);
    }
}
