//! Brute-force and closed-form references. Apart from evaluating the support
//! function these share no code with the solvers they check.

use crate::error::{RcmError, Result};
use crate::linalg::{orthogonal_complement, solve_spd, Vector};
use crate::uncertainty::{ClassMoments, PairSet, UncertaintySet};

#[derive(Debug, Clone, PartialEq)]
pub struct GridSolveResult {
    pub w_best: Vector,
    pub value: f64,
    pub grid_resolution: usize,
}

/// Maximizes `g` over a grid on the unit sphere: `{±1}` in 1-D, a uniform
/// angular grid in 2-D and a Fibonacci lattice of `resolution` points in 3-D.
pub fn grid_sphere_solve(pair: &PairSet, resolution: usize) -> Result<GridSolveResult> {
    let d = pair.dim();
    let dirs: Vec<Vector> = match d {
        1 => vec![Vector::from_element(1, 1.0), Vector::from_element(1, -1.0)],
        2 => {
            if resolution < 360 {
                return Err(RcmError::InvalidParameter(format!(
                    "2-D grid resolution {resolution} < 360"
                )));
            }
            (0..resolution)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / resolution as f64;
                    Vector::from_column_slice(&[t.cos(), t.sin()])
                })
                .collect()
        }
        3 => {
            if resolution == 0 {
                return Err(RcmError::InvalidParameter("empty grid".into()));
            }
            fibonacci_sphere(resolution)
        }
        _ => return Err(RcmError::DimensionTooLarge(d)),
    };
    let mut best: Option<(Vector, f64)> = None;
    for w in dirs {
        let g = pair.g(&w)?;
        if best.as_ref().is_none_or(|(_, b)| g > *b) {
            best = Some((w, g));
        }
    }
    let (w_best, value) = best.expect("grid is nonempty");
    Ok(GridSolveResult {
        w_best,
        value,
        grid_resolution: if d == 1 { 2 } else { resolution },
    })
}

fn fibonacci_sphere(n: usize) -> Vec<Vector> {
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            Vector::from_column_slice(&[r * t.cos(), r * t.sin(), z])
        })
        .collect()
}

const MAX_GRID_POINTS: usize = 3;
const MAX_LAMBDA_STEP: f64 = 0.02;

/// Weight vectors of `k` entries in `[0, cap]` summing to 1, drawn from the
/// multiples of `step` together with the breakpoints `cap`, `1 − cap` and
/// `1 − 2·cap` (so every vertex of the capped simplex is present).
pub fn capped_simplex_grid(k: usize, cap: f64, step: f64) -> Vec<Vec<f64>> {
    let slack = 1e-12;
    let in_range = |x: f64| x >= -slack && x <= cap + slack;
    let mut values: Vec<f64> = (0..)
        .map(|i| i as f64 * step)
        .take_while(|&x| x <= cap + slack)
        .collect();
    values.extend([cap, 1.0 - cap, 1.0 - 2.0 * cap].into_iter().filter(|&x| in_range(x)));
    values.sort_by(f64::total_cmp);
    values.dedup();

    let mut out = Vec::new();
    match k {
        0 => {}
        1 => {
            if in_range(1.0) {
                out.push(vec![1.0]);
            }
        }
        2 => {
            for &a in &values {
                let b = 1.0 - a;
                if in_range(b) {
                    out.push(vec![a, b.max(0.0)]);
                }
            }
        }
        3 => {
            for &a in &values {
                for &b in &values {
                    let c = 1.0 - a - b;
                    if in_range(c) {
                        out.push(vec![a, b, c.max(0.0)]);
                    }
                }
            }
        }
        _ => unreachable!("grid limited to three points"),
    }
    out
}

fn hull_grid(set: &UncertaintySet, step: f64) -> Result<Vec<Vector>> {
    let (points, cap) = match set {
        UncertaintySet::ConvexHull { points } => (points, 1.0),
        UncertaintySet::ReducedConvexHull { points, .. } => (points, set.cap().unwrap_or(1.0)),
        _ => {
            return Err(RcmError::InvalidParameter(
                "grid enumeration needs hull sets".into(),
            ))
        }
    };
    if points.len() > MAX_GRID_POINTS {
        return Err(RcmError::TooLarge(format!(
            "{} points per class (at most {MAX_GRID_POINTS})",
            points.len()
        )));
    }
    if !(step > 0.0 && step <= MAX_LAMBDA_STEP) {
        return Err(RcmError::InvalidParameter(format!(
            "lambda step {step} not in (0, {MAX_LAMBDA_STEP}]"
        )));
    }
    Ok(capped_simplex_grid(points.len(), cap.min(1.0), step)
        .into_iter()
        .map(|lam| {
            let mut x = Vector::zeros(set.dim());
            for (p, l) in points.iter().zip(lam) {
                x.axpy(l, p, 1.0);
            }
            x
        })
        .collect())
}

/// `min xᵀw` over the λ-grid of a small hull set.
pub fn grid_support_min(set: &UncertaintySet, w: &Vector, step: f64) -> Result<f64> {
    Ok(hull_grid(set, step)?
        .iter()
        .map(|x| x.dot(w))
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridNearest {
    pub distance: f64,
    pub x_plus: Vector,
    pub x_minus: Vector,
}

/// Nearest pair between two small hull sets by enumerating λ-grids.
pub fn grid_nearest_point(
    plus: &UncertaintySet,
    minus: &UncertaintySet,
    step: f64,
) -> Result<GridNearest> {
    let a = hull_grid(plus, step)?;
    let b = hull_grid(minus, step)?;
    if a.is_empty() || b.is_empty() {
        return Err(RcmError::InvalidParameter("empty weight grid".into()));
    }
    let mut best = (f64::INFINITY, 0, 0);
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            let d = (x - y).norm_squared();
            if d < best.0 {
                best = (d, i, j);
            }
        }
    }
    Ok(GridNearest {
        distance: best.0.sqrt(),
        x_plus: a[best.1].clone(),
        x_minus: b[best.2].clone(),
    })
}

/// `w ∝ (Σ₊ + Σ₋)⁻¹(x̄₊ − x̄₋)` and `ζ_max = √(Δᵀ(Σ₊ + Σ₋)⁻¹Δ)`.
/// With equal means `ζ_max = 0` and `w` is the first basis vector.
pub fn fda_closed_form(plus: &ClassMoments, minus: &ClassMoments) -> Result<(Vector, f64)> {
    let sum = &plus.cov + &minus.cov;
    let delta = &plus.mean - &minus.mean;
    let y = solve_spd(&sum, &delta)?;
    let q = delta.dot(&y).max(0.0);
    let n = y.norm();
    let w = if n > 0.0 {
        y / n
    } else {
        let mut e = Vector::zeros(delta.len());
        if !e.is_empty() {
            e[0] = 1.0;
        }
        e
    };
    Ok((w, q.sqrt()))
}

/// `κ_max = 1 / min{‖Σ₊^{1/2}w‖ + ‖Σ₋^{1/2}w‖ : Δᵀw = 1}` by gradient descent
/// with golden-section line search over the affine constraint set.
pub fn mpm_kappa_closed_form(plus: &ClassMoments, minus: &ClassMoments, tol: f64) -> Result<f64> {
    let delta = &plus.mean - &minus.mean;
    let dn2 = delta.norm_squared();
    if dn2 == 0.0 {
        return Err(RcmError::DegenerateMeans);
    }
    let sp = plus.sqrt_cov.as_matrix();
    let sm = minus.sqrt_cov.as_matrix();
    let w0 = &delta / dn2;
    let basis = orthogonal_complement(&(&delta / dn2.sqrt()));
    let f = |z: &Vector| {
        let w = &w0 + &basis * z;
        (sp * &w).norm() + (sm * &w).norm()
    };
    let grad = |z: &Vector| {
        let w = &w0 + &basis * z;
        let mut g = Vector::zeros(w.len());
        for s in [sp, sm] {
            let sw = s * &w;
            let n = sw.norm();
            if n > 0.0 {
                g += s.transpose() * sw / n;
            }
        }
        basis.transpose() * g
    };

    let mut z = Vector::zeros(basis.ncols());
    let mut fz = f(&z);
    for _ in 0..100_000 {
        if z.is_empty() {
            break;
        }
        let g = grad(&z);
        let gn = g.norm();
        if gn <= tol * tol {
            break;
        }
        let dir = -&g / gn;
        // Grow the step until the objective stops decreasing.
        let mut hi = fz.max(1.0) * 1e-3;
        while hi < 1e12 && f(&(&z + &dir * hi)) < fz {
            hi *= 2.0;
        }
        let (t, ft) = line_min(|t| f(&(&z + &dir * t)), 0.0, hi);
        if !(ft < fz) {
            break;
        }
        let improved = fz - ft;
        z += dir * t;
        fz = ft;
        if improved <= 1e-15 * fz {
            break;
        }
    }
    Ok(1.0 / fz)
}

fn line_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.618_033_988_749_894_8;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if b - a <= 1e-16 * (1.0 + a.abs()) {
            break;
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymMatrix;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn moments(mean: &[f64], cov: SymMatrix) -> ClassMoments {
        ClassMoments::new(v(mean), cov).unwrap()
    }

    fn hull(points: &[&[f64]]) -> UncertaintySet {
        UncertaintySet::convex_hull(points.iter().map(|p| v(p)).collect()).unwrap()
    }

    #[test]
    fn sphere_grid_examples() {
        let pair = PairSet::pair(hull(&[&[1.0, 0.0]]), hull(&[&[-1.0, 0.0]])).unwrap();
        let r = grid_sphere_solve(&pair, 3600).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert!((r.w_best - v(&[1.0, 0.0])).norm() < std::f64::consts::TAU / 3600.0);

        let ball = UncertaintySet::ellipsoid(v(&[0.5, 0.0]), SymMatrix::identity(2), 1.0).unwrap();
        let r = grid_sphere_solve(&PairSet::direct(ball), 3600).unwrap();
        assert!((r.value + 0.5).abs() < 1e-6);
        assert!((r.w_best - v(&[1.0, 0.0])).norm() < 2e-3);

        let pair = PairSet::pair(hull(&[&[-1.0], &[3.0]]), hull(&[&[-3.0], &[1.0]])).unwrap();
        let r = grid_sphere_solve(&pair, 0).unwrap();
        assert_eq!(r.w_best, v(&[1.0]));
        assert_eq!(r.value, -2.0);
    }

    #[test]
    fn sphere_grid_limits() {
        let p4 = PairSet::pair(hull(&[&[0.0; 4]]), hull(&[&[1.0; 4]])).unwrap();
        assert_eq!(grid_sphere_solve(&p4, 1000), Err(RcmError::DimensionTooLarge(4)));
        let p2 = PairSet::pair(hull(&[&[0.0; 2]]), hull(&[&[1.0; 2]])).unwrap();
        assert!(grid_sphere_solve(&p2, 100).is_err());
    }

    #[test]
    fn sphere_grid_3d() {
        let pair = PairSet::pair(hull(&[&[0.0, 0.0, 1.0]]), hull(&[&[0.0, 0.0, -1.0]])).unwrap();
        let r = grid_sphere_solve(&pair, 20_000).unwrap();
        assert!((r.value - 2.0).abs() < 1e-3);
        assert!((r.w_best.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nearest_point_grid_examples() {
        let a = hull(&[&[1.0, 0.0], &[2.0, 1.0]]);
        let b = hull(&[&[-1.0, 0.0], &[-2.0, 1.0]]);
        let r = grid_nearest_point(&a, &b, 0.01).unwrap();
        assert!((r.distance - 2.0).abs() < 1e-12);

        let r = grid_nearest_point(&a, &a, 0.02).unwrap();
        assert_eq!(r.distance, 0.0);

        let plus = UncertaintySet::reduced_convex_hull(vec![v(&[3.0]), v(&[-1.0])], 0.8, 4).unwrap();
        let minus = UncertaintySet::reduced_convex_hull(vec![v(&[-3.0]), v(&[1.0])], 0.8, 4).unwrap();
        let r = grid_nearest_point(&plus, &minus, 0.02).unwrap();
        assert!((r.distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nearest_point_grid_limits() {
        let big = hull(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let small = hull(&[&[5.0]]);
        assert!(matches!(grid_nearest_point(&big, &small, 0.01), Err(RcmError::TooLarge(_))));
        assert!(grid_nearest_point(&small, &small, 0.05).is_err());
    }

    #[test]
    fn capped_grid_contains_vertices() {
        let g = capped_simplex_grid(3, 0.4, 0.02);
        assert!(g.iter().any(|l| (l[0] - 0.4).abs() < 1e-15 && (l[1] - 0.4).abs() < 1e-15));
        assert!(g.iter().all(|l| (l.iter().sum::<f64>() - 1.0).abs() < 1e-12));
        assert!(g.iter().flatten().all(|&x| (0.0..=0.4 + 1e-12).contains(&x)));
        assert!(capped_simplex_grid(2, 0.4, 0.02).is_empty());
    }

    #[test]
    fn fda_examples() {
        let half = SymMatrix::identity(2).scaled(0.5);
        let (w, z) = fda_closed_form(&moments(&[1.0, 0.0], half.clone()), &moments(&[-1.0, 0.0], half.clone()))
            .unwrap();
        assert!((w - v(&[1.0, 0.0])).amax() < 1e-15);
        assert!((z - 2.0).abs() < 1e-15);

        let (_, z) = fda_closed_form(&moments(&[1.0, 0.0], half.clone()), &moments(&[1.0, 0.0], half)).unwrap();
        assert_eq!(z, 0.0);

        let c = SymMatrix::from_diagonal(&[1.0, 4.0]);
        let (w, z) = fda_closed_form(&moments(&[2.0, 0.0], c.clone()), &moments(&[0.0, 0.0], c)).unwrap();
        assert!((z - 2.0_f64.sqrt()).abs() < 1e-15);
        assert!((w - v(&[1.0, 0.0])).amax() < 1e-15);

        let z0 = SymMatrix::zeros(2);
        assert_eq!(
            fda_closed_form(&moments(&[1.0, 0.0], z0.clone()), &moments(&[0.0, 0.0], z0)),
            Err(RcmError::NotSpd)
        );
    }

    #[test]
    fn mpm_examples() {
        let id = SymMatrix::identity(2);
        let k = mpm_kappa_closed_form(&moments(&[1.0, 0.0], id.clone()), &moments(&[-1.0, 0.0], id.clone()), 1e-8)
            .unwrap();
        assert!((k - 1.0).abs() < 1e-9);

        let q = SymMatrix::identity(2).scaled(0.25);
        let k = mpm_kappa_closed_form(&moments(&[1.0, 0.0], q.clone()), &moments(&[-1.0, 0.0], q), 1e-8).unwrap();
        assert!((k - 2.0).abs() < 1e-9);

        for t in [0.3, 2.5] {
            let k = mpm_kappa_closed_form(&moments(&[t, 0.0], id.clone()), &moments(&[-t, 0.0], id.clone()), 1e-8)
                .unwrap();
            assert!((k - t).abs() < 1e-9);
        }

        assert_eq!(
            mpm_kappa_closed_form(&moments(&[1.0, 0.0], id.clone()), &moments(&[1.0, 0.0], id), 1e-8),
            Err(RcmError::DegenerateMeans)
        );
    }

    #[test]
    fn mpm_anisotropic_descent() {
        // Off-axis optimum: w must rotate away from Δ to shrink the seminorms.
        let a = SymMatrix::from_diagonal(&[4.0, 0.25]);
        let k = mpm_kappa_closed_form(&moments(&[1.0, 1.0], a.clone()), &moments(&[-1.0, -1.0], a), 1e-10).unwrap();
        // Equal covariances: κ_max = √(Δᵀ Σ⁻¹ Δ)/2.
        let expect = ((4.0 / 4.0 + 4.0 / 0.25) as f64).sqrt() / 2.0;
        assert!((k - expect).abs() < 1e-6, "{k} vs {expect}");
    }
}
