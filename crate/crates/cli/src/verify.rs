//! Verification suites: each check compares the solvers against an
//! independent reference on seeded instances and reports one line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use rcm_core::linalg::SymMatrix;
use rcm_core::model::{family_eta_max, summarize_eta_max, train_with_builder, EtaMaxSummary};
use rcm_core::oracle::{fda_closed_form, grid_sphere_solve, grid_support_min, mpm_kappa_closed_form};
use rcm_core::solver_convex::{
    contains_origin, eta_sweep, nearest_point, EtaMaxStatus, Regime, DEFAULT_MAX_ITER,
};
use rcm_core::solver_nonconvex::{
    hessian_g, local_optimality_check, local_search, tangent_max_eigenvalue, LocalSearchConfig,
};
use rcm_core::statcheck::{sandwich_check, ClassPriors, DiscreteDistribution, Loss};
use rcm_core::uncertainty::ClassMoments;
use rcm_core::{
    Dataset, FamilyBuilder, FamilyKind, Param, PairSet, RcmError, TrainConfig, UncertaintySet,
    Vector,
};

use crate::persist::ModelFile;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail
        )
    }

    fn from_result(id: u32, name: &'static str, r: Result<(bool, String), RcmError>) -> Self {
        match r {
            Ok((passed, detail)) => Self {
                id,
                name,
                passed,
                detail,
            },
            Err(e) => Self {
                id,
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        }
    }
}

type Check = Result<(bool, String), RcmError>;

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn angle_deg(a: &Vector, b: &Vector) -> f64 {
    (a.dot(b) / (a.norm() * b.norm())).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Two Gaussian-like clouds in `d` dimensions whose means are `sep` apart
/// along a random direction, with a random linear distortion.
pub fn random_dataset(rng: &mut ChaCha8Rng, d: usize, sep: f64) -> Dataset {
    let mut dir = Vector::from_fn(d, |_, _| normal(rng));
    dir /= dir.norm();
    // Redraw near-singular shapes; they make the covariances degenerate.
    let shape = loop {
        let a = nalgebra::DMatrix::from_fn(d, d, |i, j| {
            let base = if i == j { 1.0 } else { 0.0 };
            base + 0.4 * normal(rng)
        });
        if a.singular_values().min() >= 0.5 {
            break a;
        }
    };
    let m_plus = rng.random_range(d + 3..=2 * d + 5);
    let m_minus = rng.random_range(d + 3..=2 * d + 5);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (m, s, label) in [
        (m_plus, 0.5, rcm_core::Label::Positive),
        (m_minus, -0.5, rcm_core::Label::Negative),
    ] {
        for _ in 0..m {
            let z = Vector::from_fn(d, |_, _| normal(rng));
            points.push(&dir * (s * sep) + &shape * z);
            labels.push(label);
        }
    }
    Dataset::new(points, labels).expect("finite synthetic data")
}

/// A trained instance together with the difference set it was trained on.
#[derive(Debug, Clone)]
pub struct Instance {
    pub family: FamilyKind,
    pub pair: PairSet,
    pub w: Vector,
    pub g_value: f64,
    pub regime: Regime,
}

const FAMILIES: [FamilyKind; 4] = [
    FamilyKind::ConvexHull,
    FamilyKind::ReducedConvexHull,
    FamilyKind::Ellipsoid,
    FamilyKind::Fda,
];

/// Builds one instance of `family` aimed at the separated (`overlap =
/// false`) or overlapping regime.
fn make_instance(
    rng: &mut ChaCha8Rng,
    family: FamilyKind,
    d: usize,
    overlap: bool,
    cfg: &TrainConfig,
) -> Result<Option<(FamilyBuilder, Dataset, Param, PairSet)>, RcmError> {
    let sep = if overlap {
        rng.random_range(0.0..2.0)
    } else {
        rng.random_range(2.0..6.0)
    };
    let data = random_dataset(rng, d, sep);
    let builder = FamilyBuilder::from_dataset(family, &data, cfg.ridge)?;
    if family == FamilyKind::ConvexHull {
        let pair = builder.pair_at(0.0)?;
        let (inside, _) = contains_origin(&pair, cfg.solve.tol, DEFAULT_MAX_ITER)?;
        return Ok((inside == overlap).then_some((builder, data, Param::Auto, pair)));
    }
    let em = family_eta_max(&builder, cfg.solve.tol)?;
    if em.status != EtaMaxStatus::Found || em.eta_max <= 1e-3 {
        return Ok(None);
    }
    let eta = match (family, overlap) {
        (FamilyKind::ReducedConvexHull, false) => em.eta_max * rng.random_range(0.1..0.9),
        (FamilyKind::ReducedConvexHull, true) => {
            let upper = builder.eta_upper().expect("reduced hull has an upper bound");
            em.eta_max + (upper - em.eta_max) * rng.random_range(0.1..0.9)
        }
        (_, false) => em.eta_max * rng.random_range(0.1..0.9),
        (_, true) => em.eta_max * rng.random_range(1.1..2.0),
    };
    let native = builder.native_from_eta(eta);
    let pair = builder.pair_at(eta)?;
    Ok(Some((builder, data, Param::Value(native), pair)))
}

/// Seeded pool of trained 2-D instances, `per_family` per family, half
/// aimed at each regime.
pub fn instance_pool(seed: u64, per_family: usize) -> Result<Vec<Instance>, RcmError> {
    let cfg = TrainConfig::default();
    let mut out = Vec::new();
    for (fi, family) in FAMILIES.into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1000).wrapping_add(fi as u64));
        for i in 0..per_family {
            let overlap = i % 2 == 1;
            let mut made = None;
            for _ in 0..100 {
                if let Some(x) = make_instance(&mut rng, family, 2, overlap, &cfg)? {
                    made = Some(x);
                    break;
                }
            }
            let Some((builder, data, param, pair)) = made else {
                continue;
            };
            let m = train_with_builder(&data, &builder, param, &cfg)?;
            out.push(Instance {
                family,
                pair,
                w: m.w,
                g_value: m.g_value,
                regime: m.regime,
            });
        }
    }
    Ok(out)
}

/// Trained directions against the sphere-grid maximizer.
pub fn oracle_equivalence(pool: &[Instance], seed: u64) -> Check {
    let mut convex_total = 0;
    let mut convex_match = 0;
    let mut nonconvex_total = 0;
    let mut nonconvex_match = 0;
    let mut local_optima = 0;
    let mut not_local = 0;
    let mut worst_excess: f64 = 0.0;
    let mut per_family = [0usize; 4];
    for (k, inst) in pool.iter().enumerate() {
        per_family[FAMILIES.iter().position(|f| *f == inst.family).unwrap()] += 1;
        let grid = grid_sphere_solve(&inst.pair, 10_000)?;
        let matched = angle_deg(&inst.w, &grid.w_best) <= 2.0
            && (inst.g_value - grid.value).abs() <= 1e-2;
        if inst.regime == Regime::Overlapping {
            nonconvex_total += 1;
            if matched {
                nonconvex_match += 1;
            } else {
                let rep = local_optimality_check(&inst.pair, &inst.w, 0.05, 2000, seed + k as u64)?;
                if rep.max_violation <= 1e-8 {
                    local_optima += 1;
                } else {
                    not_local += 1;
                    worst_excess = worst_excess.max(rep.max_violation);
                }
            }
        } else {
            convex_total += 1;
            convex_match += usize::from(matched);
        }
    }
    let rate = if nonconvex_total > 0 {
        nonconvex_match as f64 / nonconvex_total as f64
    } else {
        1.0
    };
    let passed = per_family.iter().all(|&n| n == 20)
        && convex_total > 0
        && nonconvex_total > 0
        && convex_match == convex_total
        && rate >= 0.8;
    Ok((
        passed,
        format!(
            "instances per family {per_family:?}; convex {convex_match}/{convex_total} matched; \
             non-convex {nonconvex_match}/{nonconvex_total} global ({:.0}%), \
             {local_optima} local optima, {not_local} failing the local check \
             (max excess {worst_excess:.1e})",
            100.0 * rate
        ),
    ))
}

/// In the separated regime the optimal value is the nearest-point distance.
pub fn duality(pool: &[Instance]) -> Check {
    let mut n = 0;
    let mut worst_norm: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    for inst in pool.iter().filter(|i| i.regime == Regime::StrictlySeparated) {
        n += 1;
        let np = nearest_point(&inst.pair, 1e-8, DEFAULT_MAX_ITER)?;
        worst_norm = worst_norm.max((inst.w.norm() - 1.0).abs());
        worst_gap = worst_gap.max((inst.pair.g(&inst.w)? - np.distance).abs());
    }
    Ok((
        n > 0 && worst_norm <= 1e-10 && worst_gap <= 1e-6,
        format!("{n} separated instances; max |‖w‖-1| = {worst_norm:.1e}, max |g - dist| = {worst_gap:.1e}"),
    ))
}

fn symmetric_ellipsoids(scale: f64) -> Result<FamilyBuilder, RcmError> {
    let id = SymMatrix::identity(2).scaled(scale);
    Ok(FamilyBuilder::Ellipsoid {
        plus: ClassMoments::new(v(&[1.0, 0.0]), id.clone())?,
        minus: ClassMoments::new(v(&[-1.0, 0.0]), id)?,
    })
}

fn symmetric_fda() -> Result<FamilyBuilder, RcmError> {
    let half = SymMatrix::identity(2).scaled(0.5);
    FamilyBuilder::fda(
        ClassMoments::new(v(&[1.0, 0.0]), half.clone())?,
        ClassMoments::new(v(&[-1.0, 0.0]), half)?,
    )
}

fn rch_1d() -> Dataset {
    Dataset::from_rows(&[(&[3.0], 1), (&[-1.0], 1), (&[-3.0], -1), (&[1.0], -1)])
        .expect("valid rows")
}

/// Sign pattern and monotonicity of the optimal value along η.
pub fn trichotomy(seed: u64) -> Check {
    let cfg = TrainConfig::default();
    let mut builders = vec![
        symmetric_ellipsoids(1.0)?,
        symmetric_fda()?,
        FamilyBuilder::from_dataset(FamilyKind::ReducedConvexHull, &rch_1d(), 0.0)?,
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    // Random datasets whose sets never meet (or always meet) have no
    // boundary to sweep across; draw again.
    for family in [FamilyKind::Ellipsoid, FamilyKind::Fda, FamilyKind::ReducedConvexHull] {
        for _ in 0..20 {
            let data = random_dataset(&mut rng, 2, 2.5);
            let b = FamilyBuilder::from_dataset(family, &data, cfg.ridge)?;
            if family_eta_max(&b, cfg.solve.tol)?.status == EtaMaxStatus::Found {
                builders.push(b);
                break;
            }
        }
    }
    let mut sweeps = 0;
    let mut failures = Vec::new();
    let mut max_rise: f64 = 0.0;
    let mut max_boundary: f64 = 0.0;
    for (k, b) in builders.iter().enumerate() {
        let em = family_eta_max(b, cfg.solve.tol)?;
        if em.status != EtaMaxStatus::Found {
            failures.push(format!("#{k}: no eta_max"));
            continue;
        }
        let hi = b.eta_upper().unwrap_or(2.0 * em.eta_max);
        let mut grid: Vec<f64> = (0..=20).map(|i| hi * i as f64 / 20.0).collect();
        grid.push(em.eta_max);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        let values = eta_sweep(b, &grid, &cfg.solve)?;
        sweeps += 1;
        for (eta, val) in &values {
            let ok = if (eta - em.eta_max).abs() <= 1e-6 {
                max_boundary = max_boundary.max(val.abs());
                val.abs() <= 1e-4
            } else if *eta < em.eta_max {
                *val > 0.0
            } else {
                *val < 0.0
            };
            if !ok {
                failures.push(format!("#{k}: value {val:.3e} at eta {eta:.4}"));
            }
        }
        for w in values.windows(2) {
            let rise = w[1].1 - w[0].1;
            max_rise = max_rise.max(rise);
            if rise > 1e-6 {
                failures.push(format!("#{k}: rise {rise:.2e} at eta {:.4}", w[1].0));
            }
        }
    }
    let detail = format!(
        "{sweeps} sweeps; |value at eta_max| <= {max_boundary:.1e}; max rise {max_rise:.1e}{}",
        if failures.is_empty() {
            String::new()
        } else {
            format!("; {}", failures.join(", "))
        }
    );
    Ok((failures.is_empty() && sweeps == 6, detail))
}

/// Known critical parameters.
pub fn closed_form_anchors() -> Check {
    let tol = 1e-8;
    let fda = symmetric_fda()?;
    let zeta = match summarize_eta_max(&fda, &family_eta_max(&fda, tol)?) {
        EtaMaxSummary::Found(z) => z,
        _ => f64::NAN,
    };
    let (mp, mm) = match &fda {
        FamilyBuilder::Fda { plus, minus, .. } => (plus.clone(), minus.clone()),
        _ => unreachable!(),
    };
    let (_, zeta_cf) = fda_closed_form(&mp, &mm)?;

    let ell = symmetric_ellipsoids(1.0)?;
    let kappa = match summarize_eta_max(&ell, &family_eta_max(&ell, tol)?) {
        EtaMaxSummary::Found(k) => k,
        _ => f64::NAN,
    };
    let (ep, em) = match &ell {
        FamilyBuilder::Ellipsoid { plus, minus } => (plus.clone(), minus.clone()),
        _ => unreachable!(),
    };
    let kappa_cf = mpm_kappa_closed_form(&ep, &em, tol)?;

    let rch = FamilyBuilder::from_dataset(FamilyKind::ReducedConvexHull, &rch_1d(), 0.0)?;
    let nu_min = match summarize_eta_max(&rch, &family_eta_max(&rch, tol)?) {
        EtaMaxSummary::Found(n) => n,
        _ => f64::NAN,
    };

    let passed = (zeta - 2.0).abs() <= 1e-6
        && (zeta_cf - 2.0).abs() <= 1e-6
        && (kappa - 1.0).abs() <= 1e-4
        && (kappa_cf - 1.0).abs() <= 1e-4
        && (nu_min - 2.0 / 3.0).abs() <= 1e-6;
    Ok((
        passed,
        format!(
            "zeta_max {zeta:.9} (closed form {zeta_cf:.9}); kappa_max {kappa:.9} \
             (closed form {kappa_cf:.9}); nu_min {nu_min:.9}"
        ),
    ))
}

/// Training at ν_max succeeds and just above it is rejected.
pub fn nu_max_boundary() -> Check {
    let balanced = Dataset::from_rows(&[
        (&[1.0, 0.0], 1),
        (&[2.0, 1.0], 1),
        (&[1.5, -1.0], 1),
        (&[-1.0, 0.0], -1),
        (&[-2.0, 1.0], -1),
        (&[-1.5, -1.0], -1),
    ])?;
    let unbalanced = Dataset::from_rows(&[
        (&[1.0, 0.0], 1),
        (&[2.0, 1.0], 1),
        (&[-1.0, 0.0], -1),
        (&[-2.0, 1.0], -1),
        (&[-1.5, -1.0], -1),
        (&[-0.5, 2.0], -1),
        (&[-3.0, 0.5], -1),
    ])?;
    let cfg = TrainConfig::default();
    let mut details = Vec::new();
    let mut passed = true;
    for (name, data) in [("balanced", &balanced), ("unbalanced", &unbalanced)] {
        let b = FamilyBuilder::from_dataset(FamilyKind::ReducedConvexHull, data, cfg.ridge)?;
        let nu_max = b.nu_max().expect("reduced hull");
        let at = train_with_builder(data, &b, Param::Value(nu_max), &cfg);
        let above = train_with_builder(data, &b, Param::Value(nu_max + 0.01), &cfg);
        let ok = at.is_ok() && matches!(above, Err(RcmError::InfeasibleRch { .. }));
        passed &= ok;
        details.push(format!(
            "{name}: nu_max {nu_max:.6} {}",
            if ok { "ok" } else { "wrong" }
        ));
    }
    Ok((passed, details.join("; ")))
}

/// Overlapping difference sets of several families and dimensions.
pub fn overlapping_pairs(seed: u64, count: usize) -> Result<Vec<(FamilyKind, PairSet)>, RcmError> {
    let cfg = TrainConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa15);
    let mut out = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < 50 * count {
        attempts += 1;
        let family = FAMILIES[out.len() % 4];
        let d = 2 + out.len() % 4;
        if let Some((_, _, _, pair)) = make_instance(&mut rng, family, d, true, &cfg)? {
            let (inside, _) = contains_origin(&pair, cfg.solve.tol, DEFAULT_MAX_ITER)?;
            if inside {
                out.push((family, pair));
            }
        }
    }
    Ok(out)
}

/// Monotone improvement and finite termination of the local search.
pub fn local_search_dynamics(pairs: &[(FamilyKind, PairSet)]) -> Check {
    let cfg = LocalSearchConfig::default();
    let slack = 1e-12;
    let mut worst_outer = 0;
    let mut violations = Vec::new();
    for (k, (_, pair)) in pairs.iter().enumerate() {
        let r = local_search(pair, &cfg)?;
        let recs = &r.trace.records;
        worst_outer = worst_outer.max(recs.len());
        if !r.converged || recs.len() > 10_000 {
            violations.push(format!("#{k} did not terminate"));
        }
        for (t, rec) in recs.iter().enumerate() {
            if rec.w_hat.norm() < 1.0 - slack {
                violations.push(format!("#{k} t={t}: |w_hat| = {}", rec.w_hat.norm()));
            }
            if rec.g_tilde > rec.g_hat + slack {
                violations.push(format!("#{k} t={t}: g(w_hat) below g(w_tilde)"));
            }
            if let Some(next) = recs.get(t + 1) {
                if !(rec.g_hat < next.g_tilde + slack) || !(next.g_tilde < slack) {
                    violations.push(format!("#{k} t={t}: chain broken"));
                }
            }
        }
    }
    violations.truncate(5);
    Ok((
        pairs.len() == 100 && violations.is_empty(),
        format!(
            "{} overlapping instances; max outer iterations {worst_outer}{}",
            pairs.len(),
            if violations.is_empty() {
                String::new()
            } else {
                format!("; {}", violations.join(", "))
            }
        ),
    ))
}

fn fd_hessian(pair: &PairSet, w: &Vector, h: f64) -> Result<nalgebra::DMatrix<f64>, RcmError> {
    let d = w.len();
    let mut out = nalgebra::DMatrix::zeros(d, d);
    let e = |i: usize| {
        let mut x = Vector::zeros(d);
        x[i] = h;
        x
    };
    for i in 0..d {
        for j in 0..d {
            let (ei, ej) = (e(i), e(j));
            let val = pair.g(&(w + &ei + &ej))? - pair.g(&(w + &ei - &ej))?
                - pair.g(&(w - &ei + &ej))?
                + pair.g(&(w - &ei - &ej))?;
            out[(i, j)] = val / (4.0 * h * h);
        }
    }
    Ok(out)
}

/// Analytic Hessian and the second-order local optimality test.
pub fn hessian_diagnostics(pairs: &[(FamilyKind, PairSet)], seed: u64) -> Check {
    let cfg = LocalSearchConfig::default();
    let mut n = 0;
    let mut sufficient = 0;
    let mut worst_fd: f64 = 0.0;
    let mut worst_violation = f64::NEG_INFINITY;
    for (k, (family, pair)) in pairs.iter().enumerate() {
        if !matches!(family, FamilyKind::Ellipsoid | FamilyKind::Fda) {
            continue;
        }
        let r = local_search(pair, &cfg)?;
        n += 1;
        let h = hessian_g(pair, &r.w)?;
        let fd = fd_hessian(pair, &r.w, 1e-5)?;
        worst_fd = worst_fd.max((h.as_matrix() - fd).amax());
        if let Some(lmax) = tangent_max_eigenvalue(&h, &r.w)? {
            if lmax < r.value {
                sufficient += 1;
                let rep = local_optimality_check(pair, &r.w, 0.05, 2000, seed + k as u64)?;
                worst_violation = worst_violation.max(rep.max_violation);
            }
        }
    }
    let passed = n > 0 && worst_fd <= 1e-4 && (sufficient == 0 || worst_violation <= 1e-8);
    Ok((
        passed,
        format!(
            "{n} ellipsoidal solutions; max |H - H_fd| = {worst_fd:.1e}; \
             {sufficient} pass the eigenvalue test, max sampled violation {worst_violation:.1e}"
        ),
    ))
}

fn random_family(rng: &mut ChaCha8Rng, shift: f64) -> Vec<DiscreteDistribution> {
    let k = rng.random_range(1..=3);
    (0..k)
        .map(|_| {
            let n = rng.random_range(1..=4);
            let pts = (0..n)
                .map(|_| v(&[shift + rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)]))
                .collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let mut w: Vec<f64> = raw.iter().map(|r| r / s).collect();
            let head: f64 = w[..n - 1].iter().sum();
            w[n - 1] = 1.0 - head;
            DiscreteDistribution::new(pts, w).expect("normalized weights")
        })
        .collect()
}

/// Lower and upper bounds on the worst-case expected loss.
pub fn sandwich(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a4d);
    let priors = ClassPriors::equal();
    let mut held = 0;
    let mut mean_radius_held = 0;
    let mut min_lower: f64 = f64::INFINITY;
    for _ in 0..50 {
        let p = random_family(&mut rng, 1.0);
        let m = random_family(&mut rng, -1.0);
        let r = sandwich_check((&p, &m), priors, Loss::Logistic, 1e-9)?;
        held += usize::from(r.holds);
        min_lower = min_lower.min(r.worst - r.j_star);
        if r.worst <= r.j_star + 0.25 * r.c_means * r.c_means / 2.0 + 1e-9 {
            mean_radius_held += 1;
        }
    }
    let mut point_gap: f64 = 0.0;
    for _ in 0..10 {
        let mk = |rng: &mut ChaCha8Rng, s: f64| -> Vec<DiscreteDistribution> {
            (0..rng.random_range(1..=3))
                .map(|_| {
                    DiscreteDistribution::point_mass(v(&[
                        s + rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ]))
                })
                .collect()
        };
        let p = mk(&mut rng, 1.0);
        let m = mk(&mut rng, -1.0);
        let r = sandwich_check((&p, &m), priors, Loss::Logistic, 1e-9)?;
        point_gap = point_gap.max((r.worst - r.j_star).abs());
    }
    Ok((
        held == 50 && point_gap <= 1e-9,
        format!(
            "{held}/50 within [J*, J* + Lc^2/2] (c over support points; {mean_radius_held}/50 \
             would hold with c over means); min worst - J* = {min_lower:.2e}; \
             point-mass |worst - J*| <= {point_gap:.1e}"
        ),
    ))
}

/// Support oracles against enumeration and boundary sampling.
pub fn support_exactness(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0c1e);
    let mut worst_rch: f64 = 0.0;
    let mut cases = 0;
    for k in 1..=3usize {
        for other in 1..=3usize {
            for _ in 0..10 {
                let m_total = k + other;
                let pts: Vec<Vector> = (0..k)
                    .map(|_| v(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]))
                    .collect();
                let nu_max = 2.0 * k.min(other) as f64 / m_total as f64;
                let nu = rng.random_range(0.05..=1.0) * nu_max;
                let set = UncertaintySet::reduced_convex_hull(pts, nu, m_total)?;
                for _ in 0..5 {
                    let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let w = v(&[t.cos(), t.sin()]);
                    let exact = set.support_min(&w)?.value;
                    let grid = grid_support_min(&set, &w, 0.02)?;
                    worst_rch = worst_rch.max((exact - grid).abs());
                    cases += 1;
                }
            }
        }
    }

    let n = 3600;
    let mut worst_excess: f64 = 0.0;
    let mut ell_ok = true;
    for _ in 0..20 {
        let a = nalgebra::DMatrix::from_fn(2, 2, |_, _| normal(&mut rng));
        let sqrt = SymMatrix::new(&a * a.transpose())?;
        let c = v(&[normal(&mut rng), normal(&mut rng)]);
        let kappa = rng.random_range(0.1..3.0);
        let set = UncertaintySet::ellipsoid(c.clone(), sqrt.clone(), kappa)?;
        let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let w = v(&[t.cos(), t.sin()]);
        let exact = set.support_min(&w)?.value;
        let sampled = (0..n)
            .map(|i| {
                let s = std::f64::consts::TAU * i as f64 / n as f64;
                let x = &c + sqrt.as_matrix() * v(&[s.cos(), s.sin()]) * kappa;
                x.dot(&w)
            })
            .fold(f64::INFINITY, f64::min);
        let sw = (sqrt.as_matrix() * &w).norm();
        let bound = kappa * sw * (1.0 - (std::f64::consts::PI / n as f64).cos()) + 1e-12;
        let excess = sampled - exact;
        worst_excess = worst_excess.max(excess);
        ell_ok &= excess >= -1e-12 && excess <= bound;
    }
    Ok((
        worst_rch <= 1e-6 && ell_ok,
        format!(
            "{cases} reduced-hull cases, max |knapsack - grid| = {worst_rch:.1e}; \
             ellipsoid sampling excess <= {worst_excess:.1e} within grid error: {ell_ok}"
        ),
    ))
}

/// Repeated training yields identical model files.
pub fn determinism(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xde7);
    let cfg = TrainConfig::default();
    let mut compared = 0;
    let mut identical = true;
    for family in FAMILIES {
        for sep in [4.0, 0.5] {
            let data = random_dataset(&mut rng, 3, sep);
            let param = match family {
                FamilyKind::ReducedConvexHull => Param::Value(0.2),
                FamilyKind::Ellipsoid | FamilyKind::Fda => Param::Value(1.5),
                FamilyKind::ConvexHull => Param::Auto,
            };
            let run = || -> Result<String, RcmError> {
                let b = FamilyBuilder::from_dataset(family, &data, cfg.ridge)?;
                let m = train_with_builder(&data, &b, param, &cfg)?;
                Ok(ModelFile::from_model(&m).to_json())
            };
            let (a, b) = (run()?, run()?);
            identical &= a == b;
            compared += 1;
        }
    }
    Ok((identical, format!("{compared} model pairs byte-identical: {identical}")))
}

/// Runs every suite in a fixed order.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    let pool = instance_pool(seed, 20);
    let overlapping = overlapping_pairs(seed, 100);
    let pool_err = |e: &RcmError| Err(e.clone());
    vec![
        CheckResult::from_result(
            1,
            "oracle equivalence",
            pool.as_ref().map_or_else(pool_err, |p| oracle_equivalence(p, seed)),
        ),
        CheckResult::from_result(
            2,
            "nearest-point duality",
            pool.as_ref().map_or_else(pool_err, |p| duality(p)),
        ),
        CheckResult::from_result(3, "regime trichotomy and monotone sweep", trichotomy(seed)),
        CheckResult::from_result(4, "closed-form anchors", closed_form_anchors()),
        CheckResult::from_result(5, "nu_max boundary", nu_max_boundary()),
        CheckResult::from_result(
            6,
            "local search dynamics",
            overlapping
                .as_ref()
                .map_or_else(pool_err, |p| local_search_dynamics(p)),
        ),
        CheckResult::from_result(
            7,
            "hessian diagnostics",
            overlapping
                .as_ref()
                .map_or_else(pool_err, |p| hessian_diagnostics(p, seed)),
        ),
        CheckResult::from_result(8, "expected-loss sandwich", sandwich(seed)),
        CheckResult::from_result(9, "support oracle exactness", support_exactness(seed)),
        CheckResult::from_result(10, "determinism", determinism(seed)),
    ]
}
