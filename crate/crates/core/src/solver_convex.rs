//! Convex regime: when `0 ∉ U` the robust classification problem is the
//! minimum-norm point problem over the difference set, and `w* = x*/‖x*‖`.
//!
//! The nearest point is found by Frank-Wolfe, using the support oracle as the
//! linear-minimization step. Support points found so far are kept as a small
//! set of atoms and each step re-optimizes over their hull (Wolfe's
//! correction), which ends in finitely many steps on polytopes and keeps
//! smooth sets from zig-zagging.

use crate::error::{RcmError, Result};
use nalgebra::DMatrix;

use crate::linalg::Vector;
use crate::model::{solve_pair, SolveOptions};
use crate::uncertainty::{FamilyBuilder, PairSet};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_REGIME_TOL: f64 = 1e-6;

/// Cap used when doubling the upper end of an unbounded η bracket.
const ETA_HI_CAP: f64 = (1u64 << 60) as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct NearestPointResult {
    pub x_star: Vector,
    pub per_class: Option<(Vector, Vector)>,
    pub distance: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final Frank-Wolfe gap `⟨x − s, x⟩`.
    pub gap: f64,
    /// Support value at `x_star`; positive certifies `0 ∉ U`.
    pub support_value: f64,
}

impl NearestPointResult {
    /// `0 ∉ U` is certified by the hyperplane through the iterate.
    pub fn separates(&self) -> bool {
        self.support_value > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `0 ∉ U`: positive optimal value.
    StrictlySeparated,
    /// `0 ∈ bd U`: zero optimal value.
    Touching,
    /// `0 ∈ int U`: negative optimal value.
    Overlapping,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::StrictlySeparated => "strictly_separated",
            Regime::Touching => "touching",
            Regime::Overlapping => "overlapping",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = RcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strictly_separated" => Ok(Regime::StrictlySeparated),
            "touching" => Ok(Regime::Touching),
            "overlapping" => Ok(Regime::Overlapping),
            other => Err(RcmError::InvalidParameter(format!("unknown regime {other:?}"))),
        }
    }
}

/// Sign rule with a band of half-width `tol` around zero.
pub fn classify_regime(g_opt: f64, tol: f64) -> Regime {
    if g_opt > tol {
        Regime::StrictlySeparated
    } else if g_opt < -tol {
        Regime::Overlapping
    } else {
        Regime::Touching
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum StopRule {
    /// Frank-Wolfe gap below `tol²`.
    Gap { tol: f64 },
    /// Stop as soon as `0 ∉ U` is certified or `‖x‖ ≤ tol`.
    Membership { tol: f64 },
}

#[derive(Debug, Clone)]
struct Atom {
    point: Vector,
    parts: Option<(Vector, Vector)>,
    weight: f64,
}

/// Weights `α` with `Σα = 1` minimizing `‖Σ αᵢ pᵢ‖` over the affine hull.
fn affine_min_norm(atoms: &[Atom]) -> Option<Vec<f64>> {
    let k = atoms.len();
    if k == 1 {
        return Some(vec![1.0]);
    }
    let p0 = &atoms[0].point;
    let mut diffs = DMatrix::zeros(p0.len(), k - 1);
    for (j, a) in atoms[1..].iter().enumerate() {
        diffs.set_column(j, &(&a.point - p0));
    }
    let svd = diffs.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max();
    let beta = svd.solve(&(-p0), eps).ok()?;
    if beta.iter().any(|b| !b.is_finite()) {
        return None;
    }
    let mut alpha = Vec::with_capacity(k);
    alpha.push(1.0 - beta.sum());
    alpha.extend(beta.iter().copied());
    Some(alpha)
}

/// Wolfe's minor cycles: moves the weights to the min-norm point of the
/// corral's affine hull, dropping atoms until that point lies in the hull.
fn correct_corral(atoms: &mut Vec<Atom>) -> bool {
    for _ in 0..=atoms.len() {
        let Some(alpha) = affine_min_norm(atoms) else {
            return false;
        };
        if alpha.iter().all(|&a| a > 0.0) {
            for (a, w) in atoms.iter_mut().zip(alpha) {
                a.weight = w;
            }
            return true;
        }
        let mut theta = 1.0;
        let mut blocking = 0;
        for (i, (a, &al)) in atoms.iter().zip(&alpha).enumerate() {
            if al <= 0.0 {
                let t = a.weight / (a.weight - al);
                if t < theta {
                    theta = t;
                    blocking = i;
                }
            }
        }
        for (a, &al) in atoms.iter_mut().zip(&alpha) {
            a.weight += theta * (al - a.weight);
        }
        atoms[blocking].weight = 0.0;
        atoms.retain(|a| a.weight > 0.0);
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if atoms.is_empty() || !(total > 0.0) {
            return false;
        }
        for a in atoms.iter_mut() {
            a.weight /= total;
        }
    }
    false
}

fn combine(atoms: &[Atom], d: usize) -> (Vector, Option<(Vector, Vector)>) {
    let mut x = Vector::zeros(d);
    let mut parts = atoms[0]
        .parts
        .as_ref()
        .map(|_| (Vector::zeros(d), Vector::zeros(d)));
    for a in atoms {
        x.axpy(a.weight, &a.point, 1.0);
        if let (Some((xp, xm)), Some((ap, am))) = (parts.as_mut(), a.parts.as_ref()) {
            xp.axpy(a.weight, ap, 1.0);
            xm.axpy(a.weight, am, 1.0);
        }
    }
    (x, parts)
}

/// Frank-Wolfe on `min ½‖x‖²` over `U`. Each new support point joins a
/// corral of active atoms and the iterate moves to the nearest point of the
/// corral's hull (Wolfe's correction), falling back to the plain line-search
/// step if the correction is numerically worse. Returns the result and the
/// norm after every iteration when `record` is set.
fn frank_wolfe(
    pair: &PairSet,
    rule: StopRule,
    max_iter: usize,
    record: bool,
) -> Result<(NearestPointResult, Vec<f64>)> {
    let d = pair.dim();
    let start_dir = {
        let c = pair.center_difference();
        if c.norm() > 0.0 {
            c
        } else {
            let mut e = Vector::zeros(d);
            e[0] = 1.0;
            e
        }
    };
    let s0 = pair.support_min(&start_dir)?;
    let mut atoms = vec![Atom {
        point: s0.minimizer,
        parts: s0.per_class,
        weight: 1.0,
    }];
    let (mut x, mut parts) = combine(&atoms, d);

    let mut norms = Vec::new();
    if record {
        norms.push(x.norm());
    }
    let mut iterations = 0;
    let mut converged = false;
    let mut gap;
    let mut support_value;

    loop {
        let xx = x.norm_squared();
        if xx == 0.0 {
            gap = 0.0;
            support_value = 0.0;
            converged = true;
            break;
        }
        let s = pair.support_min(&x)?;
        support_value = s.value;
        gap = xx - s.value;
        let norm = xx.sqrt();
        let stop = match rule {
            StopRule::Gap { tol } => {
                // Rounding in `xx − sᵀx` is about eps · ‖x‖ · ‖s‖.
                let floor = 16.0 * f64::EPSILON * norm * (norm + s.minimizer.norm());
                gap <= (tol * tol).max(floor)
            }
            StopRule::Membership { tol } => s.value > 0.0 || norm <= tol,
        };
        if stop {
            converged = true;
            break;
        }
        if atoms.iter().any(|a| a.point == s.minimizer) {
            // x is optimal over the corral and the oracle returned a corral
            // atom, so no direction of descent remains.
            converged = true;
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;

        let fw_dir = &s.minimizer - &x;
        let dd = fw_dir.norm_squared();
        let gamma = if dd > 0.0 { (gap / dd).clamp(0.0, 1.0) } else { 0.0 };
        if gamma == 0.0 {
            break;
        }
        let fw_norm2 = (&x + &fw_dir * gamma).norm_squared();

        let mut corrected = atoms.clone();
        corrected.push(Atom {
            point: s.minimizer.clone(),
            parts: s.per_class.clone(),
            weight: 0.0,
        });
        let accepted = correct_corral(&mut corrected) && {
            let (xc, _) = combine(&corrected, d);
            xc.norm_squared() <= fw_norm2
        };
        if accepted {
            atoms = corrected;
        } else {
            for a in &mut atoms {
                a.weight *= 1.0 - gamma;
            }
            atoms.push(Atom {
                point: s.minimizer,
                parts: s.per_class,
                weight: gamma,
            });
            atoms.retain(|a| a.weight > 0.0);
        }
        (x, parts) = combine(&atoms, d);
        if record {
            norms.push(x.norm());
        }
    }

    let distance = x.norm();
    Ok((
        NearestPointResult {
            x_star: x,
            per_class: parts,
            distance,
            iterations,
            converged,
            gap,
            support_value,
        },
        norms,
    ))
}

/// Minimum-norm point of the difference set. When the iteration cap is hit
/// the current iterate is returned with `converged = false`.
pub fn nearest_point(pair: &PairSet, tol: f64, max_iter: usize) -> Result<NearestPointResult> {
    check_tol(tol)?;
    frank_wolfe(pair, StopRule::Gap { tol }, max_iter, false).map(|(r, _)| r)
}

/// As [`nearest_point`], also returning `‖x_k‖` after every iteration.
pub fn nearest_point_traced(
    pair: &PairSet,
    tol: f64,
    max_iter: usize,
) -> Result<(NearestPointResult, Vec<f64>)> {
    check_tol(tol)?;
    frank_wolfe(pair, StopRule::Gap { tol }, max_iter, true)
}

/// Decides `0 ∈ U`: true unless a separating hyperplane is found before the
/// iterate norm drops to `tol` or the iteration cap is reached.
pub fn contains_origin(pair: &PairSet, tol: f64, max_iter: usize) -> Result<(bool, NearestPointResult)> {
    check_tol(tol)?;
    let (r, _) = frank_wolfe(pair, StopRule::Membership { tol }, max_iter, false)?;
    Ok((!r.separates(), r))
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(RcmError::InvalidParameter(format!("tolerance {tol} must be > 0")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSolution {
    pub w: Vector,
    /// `g(w*)`.
    pub value: f64,
    pub distance: f64,
    /// Nearest points `(x₊*, x₋*)`; they also attain the inner minimum at `w*`.
    pub per_class: Option<(Vector, Vector)>,
    pub nearest: NearestPointResult,
}

/// Solves the separated case through the nearest point.
pub fn solve_convex(pair: &PairSet, tol: f64) -> Result<ConvexSolution> {
    let np = nearest_point(pair, tol, DEFAULT_MAX_ITER)?;
    convex_from_nearest(pair, np, tol)
}

pub(crate) fn convex_from_nearest(
    pair: &PairSet,
    np: NearestPointResult,
    tol: f64,
) -> Result<ConvexSolution> {
    if np.distance <= tol || !np.separates() {
        return Err(RcmError::NotSeparated {
            distance: np.distance,
        });
    }
    let w = unit(&np.x_star);
    let value = pair.g(&w)?;
    Ok(ConvexSolution {
        w,
        value,
        distance: np.distance,
        per_class: np.per_class.clone(),
        nearest: np,
    })
}

/// Normalizes, then corrects the last rounding so `‖w‖ = 1` to within an ulp.
pub fn unit(x: &Vector) -> Vector {
    let w = x / x.norm();
    let n = w.norm();
    if n == 1.0 {
        w
    } else {
        &w / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EtaMaxStatus {
    Found,
    /// `0 ∉ U^η` over the whole bracket.
    NeverIntersects,
    /// `0 ∈ U^η` already at the lower end.
    AlwaysIntersects,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaMaxResult {
    pub eta_max: f64,
    pub bracket: (f64, f64),
    pub distance_at_eta_max: f64,
    pub status: EtaMaxStatus,
    /// Convex solution at the lower end of the final bracket, approaching the
    /// touching configuration from the separated side.
    pub boundary: Option<ConvexSolution>,
}

/// Bracket where the family's parameter is meaningful: the admissible range
/// for the reduced convex hull, otherwise `[0, hi]` with `hi` doubled until
/// the sets intersect.
pub fn default_bracket(builder: &FamilyBuilder, tol: f64) -> Result<(f64, f64)> {
    if let Some(upper) = builder.eta_upper() {
        return Ok((0.0, upper));
    }
    if builder.kind() == crate::uncertainty::FamilyKind::ConvexHull {
        return Ok((0.0, 1.0));
    }
    let mut hi = 1.0;
    while hi < ETA_HI_CAP {
        let (inside, _) = contains_origin(&builder.pair_at(hi)?, tol, DEFAULT_MAX_ITER)?;
        if inside {
            break;
        }
        hi *= 2.0;
    }
    Ok((0.0, hi))
}

/// Smallest η with `0 ∈ U^η`, by bisection to bracket width `tol`.
pub fn eta_max(builder: &FamilyBuilder, lo: f64, hi: f64, tol: f64) -> Result<EtaMaxResult> {
    check_tol(tol)?;
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo < hi) {
        return Err(RcmError::InvalidBracket { lo, hi });
    }
    if let Some(upper) = builder.eta_upper() {
        if hi > upper + 1e-15 {
            return Err(RcmError::InvalidBracket { lo, hi });
        }
    }
    let member = |eta: f64| -> Result<(bool, NearestPointResult)> {
        contains_origin(&builder.pair_at(eta)?, tol, DEFAULT_MAX_ITER)
    };

    let (inside_hi, at_hi) = member(hi)?;
    if !inside_hi {
        return Ok(EtaMaxResult {
            eta_max: hi,
            bracket: (lo, hi),
            distance_at_eta_max: at_hi.distance,
            status: EtaMaxStatus::NeverIntersects,
            boundary: None,
        });
    }
    let (inside_lo, at_lo) = member(lo)?;
    if inside_lo {
        return Ok(EtaMaxResult {
            eta_max: lo,
            bracket: (lo, hi),
            distance_at_eta_max: at_lo.distance,
            status: EtaMaxStatus::AlwaysIntersects,
            boundary: None,
        });
    }

    let (mut a, mut b) = (lo, hi);
    let mut outside_dist = at_lo.distance;
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let (inside, r) = member(mid)?;
        if inside {
            b = mid;
        } else {
            a = mid;
            outside_dist = r.distance;
        }
    }
    let eta = 0.5 * (a + b);
    let at_eta = nearest_point(&builder.pair_at(eta)?, tol, DEFAULT_MAX_ITER)?;

    // Direction at the separated end: tighten the gap relative to the (small)
    // distance so the normalized iterate is accurate.
    let lo_pair = builder.pair_at(a)?;
    let boundary_tol = (1e-3 * outside_dist).clamp(f64::MIN_POSITIVE, tol);
    let np = nearest_point(&lo_pair, boundary_tol, DEFAULT_MAX_ITER)?;
    let boundary = if np.separates() && np.distance > 0.0 {
        let w = unit(&np.x_star);
        let value = lo_pair.g(&w)?;
        Some(ConvexSolution {
            w,
            value,
            distance: np.distance,
            per_class: np.per_class.clone(),
            nearest: np,
        })
    } else {
        None
    };

    Ok(EtaMaxResult {
        eta_max: eta,
        bracket: (a, b),
        distance_at_eta_max: at_eta.distance,
        status: EtaMaxStatus::Found,
        boundary,
    })
}

/// Optimal value of the robust problem along a grid of normalized η.
pub fn eta_sweep(
    builder: &FamilyBuilder,
    grid: &[f64],
    opts: &SolveOptions,
) -> Result<Vec<(f64, f64)>> {
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(RcmError::InvalidParameter("sweep grid must be ascending".into()));
    }
    grid.iter()
        .map(|&eta| {
            let pair = builder.pair_at(eta)?;
            solve_pair(&pair, opts).map(|s| (eta, s.value))
        })
        .collect()
}
