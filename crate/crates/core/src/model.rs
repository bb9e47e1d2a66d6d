//! Training pipeline: compute the critical parameter, solve in the right
//! regime, place the bias, predict and score.

use crate::error::{RcmError, Result};
use crate::linalg::Vector;
use crate::solver_convex::{
    classify_regime, convex_from_nearest, default_bracket, eta_max, nearest_point, unit,
    EtaMaxResult, EtaMaxStatus, NearestPointResult, Regime, DEFAULT_MAX_ITER, DEFAULT_REGIME_TOL,
    DEFAULT_TOL,
};
use crate::solver_nonconvex::{local_search, LocalSearchConfig, SolveTrace};
use crate::uncertainty::{Dataset, FamilyBuilder, FamilyKind, Label, PairSet};

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Frank-Wolfe tolerance; also the bisection width for `η_max`.
    pub tol: f64,
    /// Half-width of the band around zero classified as touching.
    pub regime_tol: f64,
    pub max_iter: usize,
    pub local: LocalSearchConfig,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            regime_tol: DEFAULT_REGIME_TOL,
            max_iter: DEFAULT_MAX_ITER,
            local: LocalSearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolvePath {
    Convex,
    Boundary,
    LocalSearch,
}

impl SolvePath {
    pub fn name(self) -> &'static str {
        match self {
            SolvePath::Convex => "convex",
            SolvePath::Boundary => "boundary",
            SolvePath::LocalSearch => "local_search",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcmSolution {
    pub w: Vector,
    pub value: f64,
    pub regime: Regime,
    pub per_class: Option<(Vector, Vector)>,
    pub path: SolvePath,
    pub nearest: NearestPointResult,
    pub trace: Option<SolveTrace>,
    pub converged: bool,
}

/// Solves the robust problem on a fixed difference set: the nearest-point
/// route when the sets are certifiably disjoint, local search otherwise.
pub fn solve_pair(pair: &PairSet, opts: &SolveOptions) -> Result<RcmSolution> {
    let np = nearest_point(pair, opts.tol, opts.max_iter)?;
    if np.separates() {
        if np.distance > opts.tol {
            let sol = convex_from_nearest(pair, np.clone(), opts.tol)?;
            return Ok(RcmSolution {
                regime: classify_regime(sol.value, opts.regime_tol),
                w: sol.w,
                value: sol.value,
                per_class: sol.per_class,
                path: SolvePath::Convex,
                converged: np.converged,
                nearest: np,
                trace: None,
            });
        }
        return boundary_solution(pair, np, opts);
    }
    match local_search(pair, &opts.local) {
        Ok(ls) => {
            let per_class = pair.support_min(&ls.w)?.per_class;
            Ok(RcmSolution {
                regime: classify_regime(ls.value, opts.regime_tol),
                w: ls.w,
                value: ls.value,
                per_class,
                path: SolvePath::LocalSearch,
                nearest: np,
                converged: ls.converged,
                trace: Some(ls.trace),
            })
        }
        // The origin sits on the boundary within solver accuracy.
        Err(RcmError::SubproblemUnbounded) => boundary_solution(pair, np, opts),
        Err(e) => Err(e),
    }
}

fn boundary_solution(
    pair: &PairSet,
    np: NearestPointResult,
    opts: &SolveOptions,
) -> Result<RcmSolution> {
    let w = if np.distance > 0.0 {
        unit(&np.x_star)
    } else {
        unit(&pair.center_difference())
    };
    let s = pair.support_min(&w)?;
    Ok(RcmSolution {
        regime: classify_regime(s.value, opts.regime_tol),
        w,
        value: s.value,
        per_class: s.per_class,
        path: SolvePath::Boundary,
        converged: np.converged,
        nearest: np,
        trace: None,
    })
}

/// Family parameter requested for training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Param {
    /// Use the critical value `η_max` (MPM, FDA, ν_min).
    Auto,
    /// Family-native scalar: ν for the reduced hull, κ or ζ for ellipsoids.
    Value(f64),
    /// Independent ellipsoid radii `(κ₊, κ₋)`.
    KappaPair(f64, f64),
}

/// Resolved family-native parameter stored with a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamValue {
    None,
    Scalar(f64),
    KappaPair(f64, f64),
}

/// `η_max` in family-native units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaMaxSummary {
    Found(f64),
    NeverIntersects,
    AlwaysIntersects,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BiasMethod {
    /// Hyperplane through the midpoint of the inner minimizers.
    Midpoint,
    /// Midpoint of the projected class means, used when the family provides
    /// no per-class minimizers.
    MidpointOfMeans,
    /// Training 0-1 error minimizing threshold on the projections.
    Threshold,
}

impl BiasMethod {
    pub fn name(self) -> &'static str {
        match self {
            BiasMethod::Midpoint => "midpoint",
            BiasMethod::MidpointOfMeans => "midpoint_of_means",
            BiasMethod::Threshold => "threshold",
        }
    }
}

impl std::str::FromStr for BiasMethod {
    type Err = RcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(BiasMethod::Midpoint),
            "midpoint_of_means" => Ok(BiasMethod::MidpointOfMeans),
            "threshold" => Ok(BiasMethod::Threshold),
            other => Err(RcmError::InvalidParameter(format!("unknown bias method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Ridge added to each covariance, relative to `trace(cov)/d`.
    pub ridge: f64,
    pub bias: BiasMethod,
    pub solve: SolveOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ridge: 1e-6,
            bias: BiasMethod::Midpoint,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub w: Vector,
    pub b: f64,
    pub family: FamilyKind,
    pub param: ParamValue,
    pub eta_max: EtaMaxSummary,
    pub regime: Regime,
    pub g_value: f64,
    pub per_class: Option<(Vector, Vector)>,
    pub bias_method: BiasMethod,
    pub path: SolvePath,
    pub trace: Option<SolveTrace>,
}

impl TrainedModel {
    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn decision_value(&self, x: &Vector) -> Result<f64> {
        if x.len() != self.w.len() {
            return Err(RcmError::DimensionMismatch {
                expected: self.w.len(),
                found: x.len(),
            });
        }
        Ok(x.dot(&self.w) + self.b)
    }
}

pub fn summarize_eta_max(builder: &FamilyBuilder, em: &EtaMaxResult) -> EtaMaxSummary {
    match em.status {
        EtaMaxStatus::Found => EtaMaxSummary::Found(builder.native_from_eta(em.eta_max)),
        EtaMaxStatus::NeverIntersects => EtaMaxSummary::NeverIntersects,
        EtaMaxStatus::AlwaysIntersects => EtaMaxSummary::AlwaysIntersects,
    }
}

/// Computes `η_max` over the family's default bracket.
pub fn family_eta_max(builder: &FamilyBuilder, tol: f64) -> Result<EtaMaxResult> {
    let (lo, hi) = default_bracket(builder, tol)?;
    eta_max(builder, lo, hi, tol)
}

/// Trains a classifier for one family and parameter.
pub fn train(
    data: &Dataset,
    family: FamilyKind,
    param: Param,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    let builder = FamilyBuilder::from_dataset(family, data, cfg.ridge)?;
    train_with_builder(data, &builder, param, cfg)
}

pub fn train_with_builder(
    data: &Dataset,
    builder: &FamilyBuilder,
    param: Param,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    let opts = &cfg.solve;
    let family = builder.kind();

    // Validate the requested parameter before the (costlier) bisection.
    let requested_eta = match param {
        Param::Value(p) if family != FamilyKind::ConvexHull => Some(builder.eta_from_native(p)?),
        Param::KappaPair(kp, km) => {
            if family != FamilyKind::Ellipsoid {
                return Err(RcmError::InvalidParameter(
                    "per-class radii need the ellipsoid family".into(),
                ));
            }
            if !(kp >= 0.0 && km >= 0.0 && kp.is_finite() && km.is_finite()) {
                return Err(RcmError::InvalidParameter(format!(
                    "radii ({kp}, {km}) must be >= 0"
                )));
            }
            None
        }
        _ => None,
    };

    let em = family_eta_max(builder, opts.tol)?;
    let summary = summarize_eta_max(builder, &em);

    let at_boundary = |eta: f64| em.status == EtaMaxStatus::Found && (eta - em.eta_max).abs() <= opts.tol;

    let (solution, param_value) = match (family, param) {
        (FamilyKind::ConvexHull, _) => (solve_pair(&builder.pair_at(0.0)?, opts)?, ParamValue::None),
        (_, Param::KappaPair(kp, km)) => (
            solve_pair(&builder.ellipsoid_pair(kp, km)?, opts)?,
            ParamValue::KappaPair(kp, km),
        ),
        (_, Param::Auto) if em.status == EtaMaxStatus::Found => (
            boundary_from_eta_max(builder, &em, opts)?,
            ParamValue::Scalar(builder.native_from_eta(em.eta_max)),
        ),
        (_, Param::Auto) => (
            solve_pair(&builder.pair_at(0.0)?, opts)?,
            ParamValue::Scalar(builder.native_from_eta(0.0)),
        ),
        (_, Param::Value(p)) => {
            let eta = requested_eta.unwrap_or(0.0);
            let sol = if at_boundary(eta) {
                boundary_from_eta_max(builder, &em, opts)?
            } else {
                solve_pair(&builder.pair_at(eta)?, opts)?
            };
            (sol, ParamValue::Scalar(p))
        }
    };

    let (b, bias_method) = match cfg.bias {
        BiasMethod::Threshold => (bias_best_threshold(data, &solution.w), BiasMethod::Threshold),
        BiasMethod::Midpoint | BiasMethod::MidpointOfMeans => match &solution.per_class {
            Some((xp, xm)) if cfg.bias == BiasMethod::Midpoint => {
                (bias_midpoint(xp, xm, &solution.w), BiasMethod::Midpoint)
            }
            _ => {
                let (mp, mm) = builder.class_means();
                (bias_midpoint(&mp, &mm, &solution.w), BiasMethod::MidpointOfMeans)
            }
        },
    };

    Ok(TrainedModel {
        w: solution.w,
        b,
        family,
        param: param_value,
        eta_max: summary,
        regime: classify_regime(solution.value, opts.regime_tol),
        g_value: solution.value,
        per_class: solution.per_class,
        bias_method,
        path: solution.path,
        trace: solution.trace,
    })
}

/// Solution at `η = η_max`: the direction comes from the separated end of the
/// final bisection bracket; value and minimizers are evaluated on `U^{η_max}`.
fn boundary_from_eta_max(
    builder: &FamilyBuilder,
    em: &EtaMaxResult,
    opts: &SolveOptions,
) -> Result<RcmSolution> {
    let pair = builder.pair_at(em.eta_max)?;
    let Some(bnd) = &em.boundary else {
        return solve_pair(&pair, opts);
    };
    let s = pair.support_min(&bnd.w)?;
    Ok(RcmSolution {
        w: bnd.w.clone(),
        value: s.value,
        regime: classify_regime(s.value, opts.regime_tol),
        per_class: s.per_class,
        path: SolvePath::Boundary,
        nearest: bnd.nearest.clone(),
        trace: None,
        converged: bnd.nearest.converged,
    })
}

/// `b = −(x₊ + x₋)ᵀw / 2`.
pub fn bias_midpoint(x_plus: &Vector, x_minus: &Vector, w: &Vector) -> f64 {
    // `+ 0.0` turns a negative zero into zero.
    -(x_plus + x_minus).dot(w) / 2.0 + 0.0
}

/// Bias minimizing the training 0-1 error of `sign(xᵀw + b)` over thresholds
/// midway between consecutive distinct projections (plus one guard on each
/// side). Ties go to the threshold farthest from its nearest projection.
pub fn bias_best_threshold(data: &Dataset, w: &Vector) -> f64 {
    let mut proj: Vec<(f64, Label)> = data.iter().map(|(x, y)| (x.dot(w), y)).collect();
    if proj.is_empty() {
        return 0.0;
    }
    proj.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n_pos = proj.iter().filter(|p| p.1 == Label::Positive).count();

    // Threshold θ predicts +1 for projections ≥ θ. Start below everything.
    let mut errors = proj.len() - n_pos;
    let lo = proj[0].0;
    let hi = proj[proj.len() - 1].0;
    let mut best = (errors, -1.0, lo - 1.0);
    let mut i = 0;
    while i < proj.len() {
        let v = proj[i].0;
        // Move every sample with this projection below the threshold.
        while i < proj.len() && proj[i].0 == v {
            match proj[i].1 {
                Label::Positive => errors += 1,
                Label::Negative => errors -= 1,
            }
            i += 1;
        }
        let (theta, margin) = if i < proj.len() {
            let next = proj[i].0;
            ((v + next) / 2.0, (next - v) / 2.0)
        } else {
            (hi + 1.0, 1.0)
        };
        let better = errors < best.0 || (errors == best.0 && margin > -best.1);
        if better {
            best = (errors, -margin, theta);
        }
    }
    // The guard below the data has margin 1, recorded as -1 above.
    if best.1 == -1.0 && best.2 == lo - 1.0 {
        return -(lo - 1.0);
    }
    -best.2
}

/// `sign(xᵀw + b)`, with zero mapped to `+1`.
pub fn predict(model: &TrainedModel, x: &Vector) -> Result<Label> {
    let f = model.decision_value(x)?;
    Ok(if f >= 0.0 {
        Label::Positive
    } else {
        Label::Negative
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub error_rate: f64,
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
    /// The evaluation set had no samples.
    pub empty: bool,
}

pub fn evaluate(model: &TrainedModel, data: &Dataset) -> Result<Metrics> {
    let mut m = Metrics {
        error_rate: 0.0,
        true_pos: 0,
        false_pos: 0,
        true_neg: 0,
        false_neg: 0,
        empty: data.is_empty(),
    };
    for (x, y) in data.iter() {
        match (predict(model, x)?, y) {
            (Label::Positive, Label::Positive) => m.true_pos += 1,
            (Label::Positive, Label::Negative) => m.false_pos += 1,
            (Label::Negative, Label::Negative) => m.true_neg += 1,
            (Label::Negative, Label::Positive) => m.false_neg += 1,
        }
    }
    if !data.is_empty() {
        m.error_rate = (m.false_pos + m.false_neg) as f64 / data.len() as f64;
    }
    Ok(m)
}

/// Ellipsoid radius for an acceptable misclassification rate:
/// `κ = √((1 − η)/η)`.
pub fn kappa_from_rate(eta_rate: f64) -> Result<f64> {
    if !(eta_rate > 0.0 && eta_rate < 1.0) {
        return Err(RcmError::InvalidRate(eta_rate));
    }
    Ok(((1.0 - eta_rate) / eta_rate).sqrt())
}

/// Worst-case accuracy bound for a radius, inverse of `κ = √(α/(1−α))`.
pub fn alpha_from_kappa(kappa: f64) -> Result<f64> {
    if !(kappa >= 0.0) {
        return Err(RcmError::InvalidParameter(format!("kappa = {kappa} must be >= 0")));
    }
    if kappa.is_infinite() {
        return Ok(1.0);
    }
    let k2 = kappa * kappa;
    Ok(k2 / (1.0 + k2))
}
