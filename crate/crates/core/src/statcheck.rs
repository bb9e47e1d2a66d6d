//! Statistical reading of the robust model: expected-loss objectives over
//! finite families of discrete class-conditional distributions, and the
//! lower/upper bounds that tie them to the robust problem on mean sets.

use crate::error::{RcmError, Result};
use crate::linalg::Vector;
use crate::model::{solve_pair, SolveOptions};
use crate::uncertainty::{PairSet, UncertaintySet};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    /// `e^{-z}`; convex and decreasing but with unbounded curvature.
    Exponential,
    /// `ln(1 + e^{-z})`, curvature at most 1/4.
    Logistic,
    Constant(f64),
}

impl Loss {
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Loss::Exponential => (-z).exp(),
            Loss::Logistic => {
                if z >= 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
            Loss::Constant(c) => c,
        }
    }

    /// `L` with `0 ≤ ℓ'' ≤ L`, if one exists.
    pub fn curvature_bound(self) -> Option<f64> {
        match self {
            Loss::Exponential => None,
            Loss::Logistic => Some(0.25),
            Loss::Constant(_) => Some(0.0),
        }
    }

    pub fn is_nonincreasing(self) -> bool {
        true
    }
}

/// Largest central second difference of `loss` over `grid`.
pub fn max_second_difference(loss: Loss, grid: impl IntoIterator<Item = f64>, h: f64) -> f64 {
    grid.into_iter()
        .map(|z| (loss.eval(z + h) - 2.0 * loss.eval(z) + loss.eval(z - h)) / (h * h))
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassPriors {
    pub pi_plus: f64,
    pub pi_minus: f64,
}

impl ClassPriors {
    pub fn new(pi_plus: f64, pi_minus: f64) -> Result<Self> {
        if !(pi_plus >= 0.0 && pi_minus >= 0.0) || (pi_plus + pi_minus - 1.0).abs() > 1e-12 {
            return Err(RcmError::InvalidParameter(format!(
                "priors ({pi_plus}, {pi_minus}) must be >= 0 and sum to 1"
            )));
        }
        Ok(Self { pi_plus, pi_minus })
    }

    pub fn equal() -> Self {
        Self {
            pi_plus: 0.5,
            pi_minus: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    points: Vec<Vector>,
    weights: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(points: Vec<Vector>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(RcmError::InvalidParameter(
                "distribution needs one weight per support point".into(),
            ));
        }
        let d = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(RcmError::DimensionMismatch {
                expected: d,
                found: p.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(RcmError::InvalidParameter("weights must be >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(RcmError::InvalidParameter(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(Self { points, weights })
    }

    pub fn point_mass(p: Vector) -> Self {
        Self {
            points: vec![p],
            weights: vec![1.0],
        }
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self) -> Vector {
        let mut m = Vector::zeros(self.dim());
        for (p, w) in self.points.iter().zip(&self.weights) {
            m.axpy(*w, p, 1.0);
        }
        m
    }

    /// `E[ℓ(s·xᵀw + t)]`.
    fn expected(&self, loss: Loss, w: &Vector, s: f64, t: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, q)| q * loss.eval(s * p.dot(w) + t))
            .sum()
    }

    /// Mixture `Σ αᵢ Pᵢ`.
    pub fn mixture(family: &[DiscreteDistribution], alphas: &[f64]) -> Result<Self> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (dist, a) in family.iter().zip(alphas) {
            for (p, q) in dist.points.iter().zip(&dist.weights) {
                points.push(p.clone());
                weights.push(a * q);
            }
        }
        Self::new(points, weights)
    }
}

/// `π₊ℓ(x₊ᵀw + b) + π₋ℓ(−x₋ᵀw − b)`.
pub fn j_loss(
    w: &Vector,
    b: f64,
    x_plus: &Vector,
    x_minus: &Vector,
    priors: ClassPriors,
    loss: Loss,
) -> f64 {
    priors.pi_plus * loss.eval(x_plus.dot(w) + b) + priors.pi_minus * loss.eval(-x_minus.dot(w) - b)
}

/// Golden-section minimization of a convex function on `[lo, hi]`.
pub fn golden_section(
    mut f: impl FnMut(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(RcmError::InvalidBracket { lo, hi });
    }
    let mut eval = |x: f64| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(RcmError::LossOverflow)
        }
    };
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
        if c == d {
            break;
        }
    }
    let mid = 0.5 * (a + b);
    let fm = eval(mid)?;
    let mut best = (mid, fm);
    for (x, v) in [(c, fc), (d, fd)] {
        if v < best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

fn default_bias_bracket(projections: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let m = projections.into_iter().fold(0.0_f64, |m, p| m.max(p.abs()));
    let b = 10.0 * m + 10.0;
    (-b, b)
}

/// Minimizes `J_ℓ(w, b; x₊, x₋)` over `b`. The default bracket is `[−B, B]`
/// with `B = 10·max projection + 10`.
pub fn min_bias_j(
    w: &Vector,
    x_plus: &Vector,
    x_minus: &Vector,
    priors: ClassPriors,
    loss: Loss,
    bracket: Option<(f64, f64)>,
    tol: f64,
) -> Result<(f64, f64)> {
    let (lo, hi) =
        bracket.unwrap_or_else(|| default_bias_bracket([x_plus.dot(w), x_minus.dot(w)]));
    golden_section(|b| j_loss(w, b, x_plus, x_minus, priors, loss), lo, hi, tol)
}

/// Set of class means of a finite family, closed under mixtures.
pub fn mean_set(family: &[DiscreteDistribution]) -> Result<UncertaintySet> {
    if family.is_empty() {
        return Err(RcmError::EmptyFamily);
    }
    UncertaintySet::convex_hull(family.iter().map(DiscreteDistribution::mean).collect())
}

fn family_projections<'a>(
    families: (&'a [DiscreteDistribution], &'a [DiscreteDistribution]),
    w: &'a Vector,
) -> impl Iterator<Item = f64> + 'a {
    families
        .0
        .iter()
        .chain(families.1)
        .flat_map(|d| d.points.iter())
        .map(move |p| p.dot(w))
}

fn check_families(families: (&[DiscreteDistribution], &[DiscreteDistribution])) -> Result<()> {
    if families.0.is_empty() || families.1.is_empty() {
        return Err(RcmError::EmptyFamily);
    }
    Ok(())
}

/// Worst-case expected loss with the bias chosen after the adversary:
/// `max over mixtures (p₊, p₋) of min_b E[ℓ]`.
///
/// The expected loss is linear in the mixture weights and convex in `b`, so
/// the max-min equals `min_b [π₊ maxᵢ E_{P₊ᵢ}ℓ(xᵀw + b) + π₋ maxⱼ E_{P₋ⱼ}ℓ(−xᵀw − b)]`,
/// which is evaluated exactly up to the golden-section tolerance.
pub fn worst_case_expected_loss(
    families: (&[DiscreteDistribution], &[DiscreteDistribution]),
    w: &Vector,
    priors: ClassPriors,
    loss: Loss,
    tol: f64,
) -> Result<f64> {
    check_families(families)?;
    let (lo, hi) = default_bias_bracket(family_projections(families, w));
    let objective = |b: f64| {
        let plus = families
            .0
            .iter()
            .map(|p| p.expected(loss, w, 1.0, b))
            .fold(f64::NEG_INFINITY, f64::max);
        let minus = families
            .1
            .iter()
            .map(|p| p.expected(loss, w, -1.0, -b))
            .fold(f64::NEG_INFINITY, f64::max);
        priors.pi_plus * plus + priors.pi_minus * minus
    };
    Ok(golden_section(objective, lo, hi, tol)?.1)
}

/// Mixture weights on a simplex grid of the given step.
fn simplex_grid(k: usize, step: f64) -> Vec<Vec<f64>> {
    let n = (1.0 / step).round() as usize;
    let mut out = Vec::new();
    let mut cur = vec![0usize; k];
    fn rec(i: usize, left: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.iter().map(|&c| c as f64 / n as f64).collect());
            return;
        }
        for c in 0..=left {
            cur[i] = c;
            rec(i + 1, left - c, n, cur, out);
        }
    }
    rec(0, n, n, &mut cur, &mut out);
    out
}

/// Brute-force reference for [`worst_case_expected_loss`]: max over a
/// mixture grid of `min_b E[ℓ]`, evaluated per mixture pair.
pub fn worst_case_expected_loss_grid(
    families: (&[DiscreteDistribution], &[DiscreteDistribution]),
    w: &Vector,
    priors: ClassPriors,
    loss: Loss,
    step: f64,
    tol: f64,
) -> Result<f64> {
    check_families(families)?;
    if !(step > 0.0 && step <= 1.0) {
        return Err(RcmError::InvalidParameter(format!("grid step {step}")));
    }
    let (lo, hi) = default_bias_bracket(family_projections(families, w));
    let plus_mix: Vec<_> = simplex_grid(families.0.len(), step)
        .iter()
        .map(|a| DiscreteDistribution::mixture(families.0, a))
        .collect::<Result<_>>()?;
    let minus_mix: Vec<_> = simplex_grid(families.1.len(), step)
        .iter()
        .map(|a| DiscreteDistribution::mixture(families.1, a))
        .collect::<Result<_>>()?;
    let mut worst = f64::NEG_INFINITY;
    for p in &plus_mix {
        for q in &minus_mix {
            let f = |b: f64| {
                priors.pi_plus * p.expected(loss, w, 1.0, b)
                    + priors.pi_minus * q.expected(loss, w, -1.0, -b)
            };
            worst = worst.max(golden_section(f, lo, hi, tol)?.1);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport {
    pub w: Vector,
    pub j_star: f64,
    pub worst: f64,
    pub upper: f64,
    /// Radius bounding every support point of every distribution.
    pub c: f64,
    /// Largest mean norm; reported for comparison only.
    pub c_means: f64,
    pub holds: bool,
}

/// Checks `J* − tol ≤ worst ≤ J* + L c²/2 + tol` at the robust solution on
/// the mean sets.
pub fn sandwich_check(
    families: (&[DiscreteDistribution], &[DiscreteDistribution]),
    priors: ClassPriors,
    loss: Loss,
    tol: f64,
) -> Result<SandwichReport> {
    check_families(families)?;
    let l = match loss.curvature_bound() {
        Some(l) if loss.is_nonincreasing() => l,
        _ => {
            return Err(RcmError::InvalidLoss(format!(
                "{loss:?} has no curvature bound"
            )))
        }
    };
    let pair = PairSet::pair(mean_set(families.0)?, mean_set(families.1)?)?;
    let sol = solve_pair(&pair, &SolveOptions::default())?;
    let w = sol.w;
    let (x_plus, x_minus) = pair
        .support_min(&w)?
        .per_class
        .expect("hull pairs report per-class minimizers");

    let b_tol = 1e-10;
    let (lo, hi) = default_bias_bracket(family_projections(families, &w));
    let (_, j_star) = min_bias_j(&w, &x_plus, &x_minus, priors, loss, Some((lo, hi)), b_tol)?;
    let worst = worst_case_expected_loss(families, &w, priors, loss, b_tol)?;

    let all = || families.0.iter().chain(families.1);
    let c = all()
        .flat_map(|d| d.points.iter())
        .map(|p| p.norm())
        .fold(0.0, f64::max);
    let c_means = all().map(|d| d.mean().norm()).fold(0.0, f64::max);
    let upper = j_star + l * c * c / 2.0;
    Ok(SandwichReport {
        holds: j_star - tol <= worst && worst <= upper + tol,
        w,
        j_star,
        worst,
        upper,
        c,
        c_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn pm(xs: &[f64]) -> DiscreteDistribution {
        DiscreteDistribution::point_mass(v(xs))
    }

    #[test]
    fn j_loss_examples() {
        let (w, xp, xm) = (v(&[1.0, 0.0]), v(&[1.0, 0.0]), v(&[-1.0, 0.0]));
        let pr = ClassPriors::equal();
        let j = j_loss(&w, 0.0, &xp, &xm, pr, Loss::Exponential);
        assert!((j - (-1.0f64).exp()).abs() < 1e-15);
        let j = j_loss(&w, 1.0, &xp, &xm, pr, Loss::Exponential);
        assert!((j - 0.5 * ((-2.0f64).exp() + 1.0)).abs() < 1e-15);
        assert!((j - 0.56767).abs() < 1e-5);
        assert_eq!(j_loss(&w, 3.0, &xp, &xm, pr, Loss::Constant(0.7)), 0.7);
    }

    #[test]
    fn min_bias_examples() {
        let (w, xp, xm) = (v(&[1.0, 0.0]), v(&[1.0, 0.0]), v(&[-1.0, 0.0]));
        let pr = ClassPriors::equal();
        let (b, val) = min_bias_j(&w, &xp, &xm, pr, Loss::Exponential, None, 1e-10).unwrap();
        assert!(b.abs() < 1e-6);
        assert!((val - (-1.0f64).exp()).abs() < 1e-15);
        let (_, val) = min_bias_j(&w, &xp, &xm, pr, Loss::Constant(2.0), None, 1e-10).unwrap();
        assert_eq!(val, 2.0);
    }

    #[test]
    fn min_bias_matches_dense_grid() {
        let w = v(&[1.0, 0.0]);
        let x = v(&[0.7, 0.2]);
        let pr = ClassPriors::equal();
        let (b, val) = min_bias_j(&w, &x, &x, pr, Loss::Logistic, None, 1e-10).unwrap();
        // Symmetric loss and equal priors center the projections.
        assert!((b + 0.7).abs() < 1e-6);
        let grid_min = (-20_000..=20_000)
            .map(|i| j_loss(&w, i as f64 * 1e-3, &x, &x, pr, Loss::Logistic))
            .fold(f64::INFINITY, f64::min);
        assert!(val <= grid_min + 1e-12);
    }

    #[test]
    fn overflow_is_reported() {
        let w = v(&[1.0]);
        let r = min_bias_j(&w, &v(&[0.0]), &v(&[0.0]), ClassPriors::equal(), Loss::Exponential, Some((-1e6, 1e6)), 1e-6);
        assert_eq!(r, Err(RcmError::LossOverflow));
    }

    #[test]
    fn mean_set_examples() {
        assert_eq!(mean_set(&[]), Err(RcmError::EmptyFamily));
        let s = mean_set(&[pm(&[1.0, 2.0])]).unwrap();
        let r = s.support_min(&v(&[0.3, -0.4])).unwrap();
        assert!((r.minimizer - v(&[1.0, 2.0])).amax() < 1e-15);

        let a = DiscreteDistribution::new(vec![v(&[-1.0, 0.0]), v(&[1.0, 0.0])], vec![0.5, 0.5]).unwrap();
        let s = mean_set(&[a, pm(&[2.0, 0.0])]).unwrap();
        assert_eq!(s.support_min(&v(&[1.0, 0.0])).unwrap().value, 0.0);
        assert_eq!(s.support_min(&v(&[-1.0, 0.0])).unwrap().value, -2.0);
        assert_eq!(s.support_min(&v(&[0.0, 1.0])).unwrap().value, 0.0);
    }

    #[test]
    fn mean_set_closed_under_mixtures() {
        let fam = vec![pm(&[0.0, 0.0]), pm(&[2.0, 0.0]), pm(&[0.0, 1.0])];
        let base = mean_set(&fam).unwrap();
        let mut more = fam.clone();
        for a in [[0.2, 0.3, 0.5], [0.5, 0.5, 0.0], [0.1, 0.1, 0.8]] {
            more.push(DiscreteDistribution::mixture(&fam, &a).unwrap());
        }
        let ext = mean_set(&more).unwrap();
        for k in 0..360 {
            let t = (k as f64).to_radians();
            let w = v(&[t.cos(), t.sin()]);
            let d = base.support_min(&w).unwrap().value - ext.support_min(&w).unwrap().value;
            assert!(d.abs() <= 1e-12);
        }
    }

    #[test]
    fn worst_case_examples() {
        let w = v(&[1.0, 0.0]);
        let pr = ClassPriors::equal();
        let plus = [pm(&[1.0, 0.0])];
        let minus = [pm(&[-1.0, 0.0])];
        let r = worst_case_expected_loss((&plus, &minus), &w, pr, Loss::Exponential, 1e-10).unwrap();
        assert!((r - (-1.0f64).exp()).abs() < 1e-12);

        let plus2 = [pm(&[1.0, 0.0]), pm(&[3.0, 0.0])];
        let r2 = worst_case_expected_loss((&plus2, &minus), &w, pr, Loss::Exponential, 1e-10).unwrap();
        assert!((r2 - r).abs() < 1e-12);
        let g = worst_case_expected_loss_grid((&plus2, &minus), &w, pr, Loss::Exponential, 0.05, 1e-10)
            .unwrap();
        assert!((g - r).abs() < 1e-12);

        let c = worst_case_expected_loss((&plus2, &minus), &w, pr, Loss::Constant(0.3), 1e-10).unwrap();
        assert_eq!(c, 0.3);
    }

    fn random_family(rng: &mut ChaCha8Rng, shift: f64) -> Vec<DiscreteDistribution> {
        let k = rng.random_range(1..=3);
        (0..k)
            .map(|_| {
                let n = rng.random_range(1..=4);
                let pts = (0..n)
                    .map(|_| v(&[shift + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]))
                    .collect();
                let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
                let s: f64 = raw.iter().sum();
                let mut wts: Vec<f64> = raw.iter().map(|r| r / s).collect();
                let head: f64 = wts[..n - 1].iter().sum();
                wts[n - 1] = 1.0 - head;
                DiscreteDistribution::new(pts, wts).unwrap()
            })
            .collect()
    }

    #[test]
    fn exact_worst_case_dominates_mixture_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pr = ClassPriors::equal();
        for _ in 0..10 {
            let p = random_family(&mut rng, 1.0);
            let m = random_family(&mut rng, -1.0);
            let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let w = v(&[t.cos(), t.sin()]);
            let exact = worst_case_expected_loss((&p, &m), &w, pr, Loss::Logistic, 1e-10).unwrap();
            let grid = worst_case_expected_loss_grid((&p, &m), &w, pr, Loss::Logistic, 0.05, 1e-10)
                .unwrap();
            assert!(grid <= exact + 1e-9, "{grid} > {exact}");
            assert!(exact - grid < 5e-2, "{exact} vs {grid}");
        }
    }

    #[test]
    fn sandwich_logistic_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = random_family(&mut rng, 1.0);
            let m = random_family(&mut rng, -1.0);
            let r = sandwich_check((&p, &m), ClassPriors::equal(), Loss::Logistic, 1e-9).unwrap();
            assert!(r.holds, "{r:?}");
        }
    }

    #[test]
    fn sandwich_point_masses_tight() {
        let p = [pm(&[1.0, 0.5]), pm(&[2.0, -1.0])];
        let m = [pm(&[-1.0, 0.0])];
        let r = sandwich_check((&p, &m), ClassPriors::equal(), Loss::Logistic, 1e-9).unwrap();
        assert!(r.holds);
        assert!((r.worst - r.j_star).abs() < 1e-12);
    }

    #[test]
    fn sandwich_spread_same_means() {
        let spread = DiscreteDistribution::new(vec![v(&[0.0, 0.0]), v(&[2.0, 0.0])], vec![0.5, 0.5]).unwrap();
        let r = sandwich_check((&[spread], &[pm(&[-1.0, 0.0])]), ClassPriors::equal(), Loss::Logistic, 1e-9)
            .unwrap();
        let tight = sandwich_check((&[pm(&[1.0, 0.0])], &[pm(&[-1.0, 0.0])]), ClassPriors::equal(), Loss::Logistic, 1e-9)
            .unwrap();
        assert!(r.worst >= r.j_star - 1e-12);
        assert!((r.j_star - tight.j_star).abs() < 1e-12);
        assert!(r.worst > tight.worst);
    }

    #[test]
    fn sandwich_rejects_exponential() {
        let r = sandwich_check((&[pm(&[1.0])], &[pm(&[-1.0])]), ClassPriors::equal(), Loss::Exponential, 1e-9);
        assert!(matches!(r, Err(RcmError::InvalidLoss(_))));
    }

    #[test]
    fn logistic_curvature_bound() {
        let grid = (-5000..=5000).map(|i| i as f64 * 0.01);
        let m = max_second_difference(Loss::Logistic, grid, 1e-4);
        assert!(m <= 0.25 + 1e-6, "{m}");
        assert!(m > 0.24);
    }

    #[test]
    fn priors_validation() {
        assert!(ClassPriors::new(0.3, 0.7).is_ok());
        assert!(ClassPriors::new(0.3, 0.6).is_err());
        assert!(ClassPriors::new(-0.1, 1.1).is_err());
    }
}
