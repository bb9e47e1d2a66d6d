//! Uncertainty sets for the class representatives and their support oracle
//! `g(w) = min_{x ∈ U} xᵀw`.
//!
//! Four families are provided: the convex hull of a class, the reduced
//! convex hull with per-sample weight cap `2/(ν m)`, the ellipsoid
//! `x̄ + Σ^{1/2} u, ‖u‖ ≤ κ`, and the summed ellipsoid built directly on the
//! difference of class means with covariance `Σ₊ + Σ₋`.

use std::fmt;

use crate::error::{RcmError, Result};
use crate::linalg::{psd_sqrt, SymMatrix, Vector};

/// Reduced convex hulls with `cap · n` below one by less than this are
/// accepted; the missing mass is absorbed by the pivot weight.
const CAP_SLACK: f64 = 1e-12;

/// Smallest ν the RCH family accepts; bounds the normalized parameter range.
pub const NU_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Positive => 1.0,
            Label::Negative => -1.0,
        }
    }

    pub fn from_sign(value: i64) -> Option<Self> {
        match value {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Positive => write!(f, "+1"),
            Label::Negative => write!(f, "-1"),
        }
    }
}

/// Labeled samples sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Vector>,
    labels: Vec<Label>,
    dim: usize,
}

impl Dataset {
    /// Validates shapes and finiteness. A dataset may hold a single class or
    /// no samples at all; training entry points call [`Dataset::check_trainable`].
    pub fn new(points: Vec<Vector>, labels: Vec<Label>) -> Result<Self> {
        if points.len() != labels.len() {
            return Err(RcmError::InvalidData(format!(
                "{} points but {} labels",
                points.len(),
                labels.len()
            )));
        }
        let dim = points.first().map_or(0, |p| p.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(RcmError::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(RcmError::InvalidData(format!("sample {i} is not finite")));
            }
        }
        Ok(Self { points, labels, dim })
    }

    /// Builds a dataset from plain rows, mainly for tests and examples.
    pub fn from_rows(rows: &[(&[f64], i64)]) -> Result<Self> {
        let mut points = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for (x, y) in rows {
            points.push(Vector::from_column_slice(x));
            labels.push(
                Label::from_sign(*y)
                    .ok_or_else(|| RcmError::InvalidData(format!("label {y} is not ±1")))?,
            );
        }
        Self::new(points, labels)
    }

    pub fn check_trainable(&self) -> Result<()> {
        for class in [Label::Positive, Label::Negative] {
            if self.count(class) == 0 {
                return Err(RcmError::EmptyClass(class));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vector, Label)> {
        self.points.iter().zip(self.labels.iter().copied())
    }

    pub fn count(&self, class: Label) -> usize {
        self.labels.iter().filter(|&&l| l == class).count()
    }

    /// Samples of one class, in input order.
    pub fn class_points(&self, class: Label) -> Vec<Vector> {
        self.iter()
            .filter(|(_, l)| *l == class)
            .map(|(x, _)| x.clone())
            .collect()
    }
}

/// Sample mean and covariance of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMoments {
    pub mean: Vector,
    pub cov: SymMatrix,
    pub sqrt_cov: SymMatrix,
    pub ridge: f64,
}

impl ClassMoments {
    pub fn new(mean: Vector, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(RcmError::DimensionMismatch {
                expected: cov.dim(),
                found: mean.len(),
            });
        }
        let sqrt_cov = psd_sqrt(&cov)?;
        Ok(Self {
            mean,
            cov,
            sqrt_cov,
            ridge: 0.0,
        })
    }
}

/// Mean and population covariance (`1/m` normalization) of one class, plus
/// `ridge · I`.
pub fn estimate_moments(data: &Dataset, class: Label, ridge: f64) -> Result<ClassMoments> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(RcmError::InvalidParameter(format!("ridge {ridge} must be >= 0")));
    }
    let pts = data.class_points(class);
    if pts.is_empty() {
        return Err(RcmError::EmptyClass(class));
    }
    let d = data.dim();
    let m = pts.len() as f64;
    let mean = pts.iter().fold(Vector::zeros(d), |acc, x| acc + x) / m;
    let mut cov = nalgebra::DMatrix::zeros(d, d);
    for x in &pts {
        let c = x - &mean;
        cov += &c * c.transpose();
    }
    cov /= m;
    for i in 0..d {
        cov[(i, i)] += ridge;
    }
    let cov = SymMatrix::new(cov)?;
    let sqrt_cov = psd_sqrt(&cov)?;
    Ok(ClassMoments {
        mean,
        cov,
        sqrt_cov,
        ridge,
    })
}

/// Ridge scaled to the class spread: `factor · trace(cov) / d`, computed on
/// the unridged covariance.
pub fn relative_ridge(data: &Dataset, class: Label, factor: f64) -> Result<f64> {
    let raw = estimate_moments(data, class, 0.0)?;
    let d = data.dim().max(1) as f64;
    Ok(factor * raw.cov.trace() / d)
}

/// A compact convex set with a linear-minimization oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum UncertaintySet {
    ConvexHull {
        points: Vec<Vector>,
    },
    /// Convex combinations with every weight at most `2 / (nu · m_total)`.
    ReducedConvexHull {
        points: Vec<Vector>,
        nu: f64,
        m_total: usize,
    },
    Ellipsoid {
        center: Vector,
        sqrt_cov: SymMatrix,
        radius: f64,
    },
    /// Ellipsoid on the difference of means, used as a set of differences.
    SummedEllipsoid {
        center: Vector,
        sqrt_cov: SymMatrix,
        radius: f64,
    },
}

/// Value of the support oracle and the point attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportResult {
    pub value: f64,
    pub minimizer: Vector,
    /// `(x₊, x₋)` with `minimizer = x₊ − x₋`, for pairs of class sets.
    pub per_class: Option<(Vector, Vector)>,
}

impl UncertaintySet {
    pub fn convex_hull(points: Vec<Vector>) -> Result<Self> {
        check_points(&points)?;
        Ok(Self::ConvexHull { points })
    }

    pub fn reduced_convex_hull(points: Vec<Vector>, nu: f64, m_total: usize) -> Result<Self> {
        check_points(&points)?;
        if !(nu > 0.0 && nu.is_finite()) || m_total == 0 {
            return Err(RcmError::InvalidParameter(format!(
                "nu = {nu} must be positive and m_total = {m_total} nonzero"
            )));
        }
        if !rch_feasible(nu, points.len(), m_total) {
            return Err(RcmError::InfeasibleRch {
                nu,
                nu_max: 2.0 * points.len() as f64 / m_total as f64,
            });
        }
        Ok(Self::ReducedConvexHull {
            points,
            nu,
            m_total,
        })
    }

    pub fn ellipsoid(center: Vector, sqrt_cov: SymMatrix, radius: f64) -> Result<Self> {
        check_ellipsoid(&center, &sqrt_cov, radius)?;
        Ok(Self::Ellipsoid {
            center,
            sqrt_cov,
            radius,
        })
    }

    pub fn summed_ellipsoid(center: Vector, sqrt_cov: SymMatrix, radius: f64) -> Result<Self> {
        check_ellipsoid(&center, &sqrt_cov, radius)?;
        Ok(Self::SummedEllipsoid {
            center,
            sqrt_cov,
            radius,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::ConvexHull { points } | Self::ReducedConvexHull { points, .. } => points[0].len(),
            Self::Ellipsoid { center, .. } | Self::SummedEllipsoid { center, .. } => center.len(),
        }
    }

    /// Per-weight cap of a hull family (`1` for the plain convex hull).
    pub fn cap(&self) -> Option<f64> {
        match self {
            Self::ConvexHull { .. } => Some(1.0),
            Self::ReducedConvexHull { nu, m_total, .. } => Some(2.0 / (nu * *m_total as f64)),
            _ => None,
        }
    }

    /// Centroid of a hull family, center of an ellipsoid.
    pub fn center(&self) -> Vector {
        match self {
            Self::ConvexHull { points } | Self::ReducedConvexHull { points, .. } => {
                points.iter().fold(Vector::zeros(points[0].len()), |a, x| a + x)
                    / points.len() as f64
            }
            Self::Ellipsoid { center, .. } | Self::SummedEllipsoid { center, .. } => center.clone(),
        }
    }

    pub fn is_polytope(&self) -> bool {
        matches!(self, Self::ConvexHull { .. } | Self::ReducedConvexHull { .. })
    }

    /// `min_{x ∈ U} xᵀw` and a minimizer.
    pub fn support_min(&self, w: &Vector) -> Result<SupportResult> {
        check_direction(w, self.dim())?;
        match self {
            Self::ConvexHull { points } => {
                let (best, value) = points
                    .iter()
                    .enumerate()
                    .map(|(i, x)| (i, x.dot(w)))
                    .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
                Ok(SupportResult {
                    value,
                    minimizer: points[best].clone(),
                    per_class: None,
                })
            }
            Self::ReducedConvexHull { points, .. } => {
                let cap = self.cap().unwrap_or(1.0);
                let projections: Vec<f64> = points.iter().map(|x| x.dot(w)).collect();
                let weights = knapsack_weights(&projections, cap)?;
                let mut minimizer = Vector::zeros(w.len());
                let mut value = 0.0;
                for ((x, &p), &l) in points.iter().zip(&projections).zip(&weights) {
                    if l > 0.0 {
                        minimizer.axpy(l, x, 1.0);
                        value += l * p;
                    }
                }
                Ok(SupportResult {
                    value,
                    minimizer,
                    per_class: None,
                })
            }
            Self::Ellipsoid {
                center,
                sqrt_cov,
                radius,
            }
            | Self::SummedEllipsoid {
                center,
                sqrt_cov,
                radius,
            } => {
                let sw = sqrt_cov.as_matrix() * w;
                let seminorm = sw.norm();
                let base = center.dot(w);
                if seminorm == 0.0 || *radius == 0.0 {
                    return Ok(SupportResult {
                        value: base,
                        minimizer: center.clone(),
                        per_class: None,
                    });
                }
                let offset = sqrt_cov.as_matrix() * sw * (radius / seminorm);
                Ok(SupportResult {
                    value: base - radius * seminorm,
                    minimizer: center - offset,
                    per_class: None,
                })
            }
        }
    }
}

fn check_points(points: &[Vector]) -> Result<()> {
    let first = points
        .first()
        .ok_or_else(|| RcmError::InvalidData("hull needs at least one point".into()))?;
    for p in points {
        if p.len() != first.len() {
            return Err(RcmError::DimensionMismatch {
                expected: first.len(),
                found: p.len(),
            });
        }
    }
    Ok(())
}

fn check_ellipsoid(center: &Vector, sqrt_cov: &SymMatrix, radius: f64) -> Result<()> {
    if center.len() != sqrt_cov.dim() {
        return Err(RcmError::DimensionMismatch {
            expected: sqrt_cov.dim(),
            found: center.len(),
        });
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(RcmError::InvalidParameter(format!("radius {radius} must be >= 0")));
    }
    Ok(())
}

fn check_direction(w: &Vector, dim: usize) -> Result<()> {
    if w.len() != dim {
        return Err(RcmError::DimensionMismatch {
            expected: dim,
            found: w.len(),
        });
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(RcmError::InvalidParameter("direction is not finite".into()));
    }
    Ok(())
}

/// Minimizes `Σ λᵢ pᵢ` over `{λ : Σ λᵢ = 1, 0 ≤ λᵢ ≤ cap}`: fill the
/// smallest projections to the cap, the pivot takes the remainder. Ties are
/// broken by ascending index.
pub fn knapsack_weights(projections: &[f64], cap: f64) -> Result<Vec<f64>> {
    let n = projections.len();
    if cap * (n as f64) < 1.0 - CAP_SLACK {
        return Err(RcmError::InfeasibleRch {
            nu: f64::NAN,
            nu_max: f64::NAN,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| projections[i].total_cmp(&projections[j]).then(i.cmp(&j)));
    let mut weights = vec![0.0; n];
    let mut remaining = 1.0;
    for (rank, &i) in order.iter().enumerate() {
        if remaining <= 0.0 {
            break;
        }
        let last = rank + 1 == n;
        let take = if last { remaining } else { cap.min(remaining) };
        weights[i] = take;
        remaining -= take;
    }
    Ok(weights)
}

/// Whether the reduced convex hull of `m_class` points with parameter ν is
/// nonempty, i.e. `ν ≤ 2 m_class / m_total`.
pub fn rch_feasible(nu: f64, m_class: usize, m_total: usize) -> bool {
    let cap = 2.0 / (nu * m_total as f64);
    cap * m_class as f64 >= 1.0 - CAP_SLACK
}

/// The Minkowski difference `U₊ ⊖ U₋`, either as a pair of class sets or as a
/// set of differences given directly.
#[derive(Debug, Clone, PartialEq)]
pub enum PairSet {
    Pair {
        plus: UncertaintySet,
        minus: UncertaintySet,
    },
    Direct {
        diff: UncertaintySet,
    },
}

impl PairSet {
    pub fn pair(plus: UncertaintySet, minus: UncertaintySet) -> Result<Self> {
        if plus.dim() != minus.dim() {
            return Err(RcmError::DimensionMismatch {
                expected: plus.dim(),
                found: minus.dim(),
            });
        }
        Ok(Self::Pair { plus, minus })
    }

    pub fn direct(diff: UncertaintySet) -> Self {
        Self::Direct { diff }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Pair { plus, .. } => plus.dim(),
            Self::Direct { diff } => diff.dim(),
        }
    }

    pub fn is_polytope(&self) -> bool {
        match self {
            Self::Pair { plus, minus } => plus.is_polytope() && minus.is_polytope(),
            Self::Direct { diff } => diff.is_polytope(),
        }
    }

    /// Difference of the set centers; a point of `U`.
    pub fn center_difference(&self) -> Vector {
        match self {
            Self::Pair { plus, minus } => plus.center() - minus.center(),
            Self::Direct { diff } => diff.center(),
        }
    }

    /// `g(w) = min_{x₊ ∈ U₊, x₋ ∈ U₋} (x₊ − x₋)ᵀw`.
    pub fn support_min(&self, w: &Vector) -> Result<SupportResult> {
        match self {
            Self::Pair { plus, minus } => {
                let p = plus.support_min(w)?;
                let m = minus.support_min(&-w)?;
                Ok(SupportResult {
                    value: p.value + m.value,
                    minimizer: &p.minimizer - &m.minimizer,
                    per_class: Some((p.minimizer, m.minimizer)),
                })
            }
            Self::Direct { diff } => diff.support_min(w),
        }
    }

    /// Value of the support oracle only.
    pub fn g(&self, w: &Vector) -> Result<f64> {
        self.support_min(w).map(|s| s.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyKind {
    ConvexHull,
    ReducedConvexHull,
    Ellipsoid,
    Fda,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::ConvexHull => "ch",
            FamilyKind::ReducedConvexHull => "rch",
            FamilyKind::Ellipsoid => "ellipsoid",
            FamilyKind::Fda => "fda",
        }
    }

    /// Name of the family-native parameter.
    pub fn param_name(self) -> &'static str {
        match self {
            FamilyKind::ConvexHull => "none",
            FamilyKind::ReducedConvexHull => "nu",
            FamilyKind::Ellipsoid => "kappa",
            FamilyKind::Fda => "zeta",
        }
    }
}

impl std::str::FromStr for FamilyKind {
    type Err = RcmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ch" => Ok(FamilyKind::ConvexHull),
            "rch" => Ok(FamilyKind::ReducedConvexHull),
            "ellipsoid" => Ok(FamilyKind::Ellipsoid),
            "fda" => Ok(FamilyKind::Fda),
            other => Err(RcmError::InvalidParameter(format!("unknown family {other:?}"))),
        }
    }
}

/// A one-parameter family `η ↦ U^η` built from data, normalized so that the
/// sets grow with η. For the reduced convex hull `η = ν_max − ν`; for the
/// ellipsoids η is the radius; the convex hull does not depend on η.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyBuilder {
    ConvexHull {
        plus: Vec<Vector>,
        minus: Vec<Vector>,
    },
    ReducedConvexHull {
        plus: Vec<Vector>,
        minus: Vec<Vector>,
    },
    Ellipsoid {
        plus: ClassMoments,
        minus: ClassMoments,
    },
    Fda {
        plus: ClassMoments,
        minus: ClassMoments,
        sqrt_sum: SymMatrix,
    },
}

impl FamilyBuilder {
    /// Builds the family; `ridge_factor` is relative to each class's
    /// `trace(cov)/d` and only affects the ellipsoidal families.
    pub fn from_dataset(kind: FamilyKind, data: &Dataset, ridge_factor: f64) -> Result<Self> {
        data.check_trainable()?;
        let plus = data.class_points(Label::Positive);
        let minus = data.class_points(Label::Negative);
        match kind {
            FamilyKind::ConvexHull => Ok(Self::ConvexHull { plus, minus }),
            FamilyKind::ReducedConvexHull => Ok(Self::ReducedConvexHull { plus, minus }),
            FamilyKind::Ellipsoid | FamilyKind::Fda => {
                let mp = estimate_moments(
                    data,
                    Label::Positive,
                    relative_ridge(data, Label::Positive, ridge_factor)?,
                )?;
                let mm = estimate_moments(
                    data,
                    Label::Negative,
                    relative_ridge(data, Label::Negative, ridge_factor)?,
                )?;
                if kind == FamilyKind::Ellipsoid {
                    Ok(Self::Ellipsoid {
                        plus: mp,
                        minus: mm,
                    })
                } else {
                    Self::fda(mp, mm)
                }
            }
        }
    }

    pub fn fda(plus: ClassMoments, minus: ClassMoments) -> Result<Self> {
        let sqrt_sum = psd_sqrt(&(&plus.cov + &minus.cov))?;
        Ok(Self::Fda {
            plus,
            minus,
            sqrt_sum,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            Self::ConvexHull { .. } => FamilyKind::ConvexHull,
            Self::ReducedConvexHull { .. } => FamilyKind::ReducedConvexHull,
            Self::Ellipsoid { .. } => FamilyKind::Ellipsoid,
            Self::Fda { .. } => FamilyKind::Fda,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::ConvexHull { plus, .. } | Self::ReducedConvexHull { plus, .. } => plus[0].len(),
            Self::Ellipsoid { plus, .. } | Self::Fda { plus, .. } => plus.mean.len(),
        }
    }

    pub fn class_means(&self) -> (Vector, Vector) {
        match self {
            Self::ConvexHull { plus, minus } | Self::ReducedConvexHull { plus, minus } => {
                (centroid(plus), centroid(minus))
            }
            Self::Ellipsoid { plus, minus } | Self::Fda { plus, minus, .. } => {
                (plus.mean.clone(), minus.mean.clone())
            }
        }
    }

    /// `ν_max = 2 min(m₊, m₋) / m` for the reduced convex hull.
    pub fn nu_max(&self) -> Option<f64> {
        match self {
            Self::ReducedConvexHull { plus, minus } => {
                let m = (plus.len() + minus.len()) as f64;
                Some(2.0 * plus.len().min(minus.len()) as f64 / m)
            }
            _ => None,
        }
    }

    /// Largest admissible normalized η, if the family is bounded.
    pub fn eta_upper(&self) -> Option<f64> {
        self.nu_max().map(|nu_max| nu_max - NU_FLOOR)
    }

    /// Converts a family-native parameter (ν, κ or ζ) to normalized η.
    pub fn eta_from_native(&self, param: f64) -> Result<f64> {
        if !param.is_finite() {
            return Err(RcmError::InvalidParameter(format!("parameter {param} is not finite")));
        }
        match self.nu_max() {
            Some(nu_max) => {
                if param <= 0.0 {
                    return Err(RcmError::InvalidParameter(format!("nu = {param} must be > 0")));
                }
                let Self::ReducedConvexHull { plus, minus } = self else {
                    unreachable!()
                };
                let m_total = plus.len() + minus.len();
                let m_class = plus.len().min(minus.len());
                if !rch_feasible(param, m_class, m_total) {
                    return Err(RcmError::InfeasibleRch { nu: param, nu_max });
                }
                Ok((nu_max - param).max(0.0))
            }
            None => {
                if param < 0.0 {
                    return Err(RcmError::InvalidParameter(format!(
                        "radius {param} must be >= 0"
                    )));
                }
                Ok(param)
            }
        }
    }

    /// Converts normalized η back to the family-native parameter.
    pub fn native_from_eta(&self, eta: f64) -> f64 {
        match self.nu_max() {
            Some(nu_max) => nu_max - eta,
            None => eta,
        }
    }

    /// The difference set `U^η`.
    pub fn pair_at(&self, eta: f64) -> Result<PairSet> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(RcmError::InvalidParameter(format!("eta = {eta} must be >= 0")));
        }
        match self {
            Self::ConvexHull { plus, minus } => PairSet::pair(
                UncertaintySet::convex_hull(plus.clone())?,
                UncertaintySet::convex_hull(minus.clone())?,
            ),
            Self::ReducedConvexHull { plus, minus } => {
                let nu_max = self.nu_max().unwrap_or(1.0);
                let nu = nu_max - eta;
                if nu < NU_FLOOR * 0.5 {
                    return Err(RcmError::InvalidParameter(format!(
                        "eta = {eta} leaves nu = {nu} below the floor {NU_FLOOR}"
                    )));
                }
                let m_total = plus.len() + minus.len();
                PairSet::pair(
                    UncertaintySet::reduced_convex_hull(plus.clone(), nu, m_total)?,
                    UncertaintySet::reduced_convex_hull(minus.clone(), nu, m_total)?,
                )
            }
            Self::Ellipsoid { .. } => self.ellipsoid_pair(eta, eta),
            Self::Fda {
                plus,
                minus,
                sqrt_sum,
            } => Ok(PairSet::direct(UncertaintySet::summed_ellipsoid(
                &plus.mean - &minus.mean,
                sqrt_sum.clone(),
                eta,
            )?)),
        }
    }

    /// Ellipsoid pair with independent radii `κ₊`, `κ₋`.
    pub fn ellipsoid_pair(&self, kappa_plus: f64, kappa_minus: f64) -> Result<PairSet> {
        let Self::Ellipsoid { plus, minus } = self else {
            return Err(RcmError::InvalidParameter(
                "per-class radii need the ellipsoid family".into(),
            ));
        };
        PairSet::pair(
            UncertaintySet::ellipsoid(plus.mean.clone(), plus.sqrt_cov.clone(), kappa_plus)?,
            UncertaintySet::ellipsoid(minus.mean.clone(), minus.sqrt_cov.clone(), kappa_minus)?,
        )
    }
}

/// `U^η` for a family; see [`FamilyBuilder::pair_at`].
pub fn scale_pair(builder: &FamilyBuilder, eta: f64) -> Result<PairSet> {
    builder.pair_at(eta)
}

fn centroid(points: &[Vector]) -> Vector {
    points.iter().fold(Vector::zeros(points[0].len()), |a, x| a + x) / points.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn moments_two_points() {
        let data = Dataset::from_rows(&[(&[0.0, 0.0], 1), (&[2.0, 0.0], 1), (&[5.0, 5.0], -1)])
            .unwrap();
        let m = estimate_moments(&data, Label::Positive, 0.0).unwrap();
        assert_eq!(m.mean, v(&[1.0, 0.0]));
        assert_eq!(m.cov.as_matrix(), SymMatrix::from_diagonal(&[1.0, 0.0]).as_matrix());
    }

    #[test]
    fn moments_single_point_ridge() {
        let data = Dataset::from_rows(&[(&[3.0, -1.0], 1), (&[0.0, 0.0], -1)]).unwrap();
        let m = estimate_moments(&data, Label::Positive, 1e-6).unwrap();
        assert_eq!(m.mean, v(&[3.0, -1.0]));
        assert!((m.cov.as_matrix() - SymMatrix::identity(2).scaled(1e-6).as_matrix()).amax() < 1e-20);
        let s2 = m.sqrt_cov.as_matrix() * m.sqrt_cov.as_matrix();
        assert!((s2 - m.cov.as_matrix()).amax() < 1e-15);
    }

    #[test]
    fn moments_cross() {
        let data = Dataset::from_rows(&[
            (&[1.0, 0.0], -1),
            (&[-1.0, 0.0], -1),
            (&[0.0, 1.0], -1),
            (&[0.0, -1.0], -1),
            (&[9.0, 9.0], 1),
        ])
        .unwrap();
        let m = estimate_moments(&data, Label::Negative, 0.0).unwrap();
        assert_eq!(m.mean, v(&[0.0, 0.0]));
        assert_eq!(m.cov.as_matrix(), SymMatrix::from_diagonal(&[0.5, 0.5]).as_matrix());
    }

    #[test]
    fn moments_empty_class() {
        let data = Dataset::from_rows(&[(&[1.0], 1)]).unwrap();
        assert_eq!(
            estimate_moments(&data, Label::Negative, 0.0),
            Err(RcmError::EmptyClass(Label::Negative))
        );
    }

    #[test]
    fn ellipsoid_support_closed_form() {
        let e = UncertaintySet::ellipsoid(v(&[1.0, 0.0]), SymMatrix::identity(2), 0.5).unwrap();
        let s = e.support_min(&v(&[1.0, 0.0])).unwrap();
        assert!((s.value - 0.5).abs() < 1e-15);
        assert!((s.minimizer - v(&[0.5, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn ellipsoid_degenerate_direction() {
        let s = SymMatrix::from_diagonal(&[1.0, 0.0]);
        let e = UncertaintySet::ellipsoid(v(&[2.0, 3.0]), s, 1.0).unwrap();
        let r = e.support_min(&v(&[0.0, 1.0])).unwrap();
        assert_eq!(r.minimizer, v(&[2.0, 3.0]));
        assert_eq!(r.value, 3.0);
    }

    #[test]
    fn rch_knapsack_by_hand() {
        // Points 0, 1, 2 with cap 1/3: uniform weights.
        let pts = vec![v(&[0.0]), v(&[1.0]), v(&[2.0])];
        let set = UncertaintySet::reduced_convex_hull(pts, 1.0, 6).unwrap();
        let r = set.support_min(&v(&[1.0])).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        assert!((r.minimizer[0] - 1.0).abs() < 1e-15);

        let w = knapsack_weights(&[2.0, 0.0, 1.0], 0.4).unwrap();
        for (got, want) in w.iter().zip([0.2, 0.4, 0.4]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn knapsack_ties_by_index() {
        let w = knapsack_weights(&[1.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!(w, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn convex_hull_vertex() {
        let set = UncertaintySet::convex_hull(vec![v(&[1.0, 0.0]), v(&[2.0, 1.0])]).unwrap();
        let r = set.support_min(&v(&[1.0, 0.0])).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.minimizer, v(&[1.0, 0.0]));
    }

    #[test]
    fn infeasible_rch() {
        let pts = vec![v(&[0.0]), v(&[1.0])];
        assert!(matches!(
            UncertaintySet::reduced_convex_hull(pts, 1.5, 4),
            Err(RcmError::InfeasibleRch { .. })
        ));
    }

    #[test]
    fn feasibility_boundary() {
        assert!(rch_feasible(1.0, 3, 6));
        assert!(!rch_feasible(1.01, 3, 6));
        assert!(rch_feasible(1e-9, 1, 1000));
        // ν_max computed in floating point for awkward counts.
        for (mc, mt) in [(3usize, 7usize), (5, 13), (7, 31), (1, 3)] {
            let nu_max = 2.0 * mc as f64 / mt as f64;
            assert!(rch_feasible(nu_max, mc, mt));
            assert!(!rch_feasible(nu_max + 0.01, mc, mt));
        }
    }

    #[test]
    fn pair_of_singletons() {
        let pair = PairSet::pair(
            UncertaintySet::convex_hull(vec![v(&[1.0, 0.0])]).unwrap(),
            UncertaintySet::convex_hull(vec![v(&[-1.0, 0.0])]).unwrap(),
        )
        .unwrap();
        let r = pair.support_min(&v(&[1.0, 0.0])).unwrap();
        assert_eq!(r.value, 2.0);
        let (xp, xm) = r.per_class.unwrap();
        assert_eq!(xp, v(&[1.0, 0.0]));
        assert_eq!(xm, v(&[-1.0, 0.0]));
    }

    #[test]
    fn pair_of_ellipsoids() {
        let pair = PairSet::pair(
            UncertaintySet::ellipsoid(v(&[1.0, 0.0]), SymMatrix::identity(2), 0.5).unwrap(),
            UncertaintySet::ellipsoid(v(&[-1.0, 0.0]), SymMatrix::identity(2), 0.5).unwrap(),
        )
        .unwrap();
        let r = pair.support_min(&v(&[1.0, 0.0])).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
        let (xp, xm) = r.per_class.unwrap();
        assert!((xp - v(&[0.5, 0.0])).amax() < 1e-15);
        assert!((xm - v(&[-0.5, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let set = UncertaintySet::convex_hull(vec![v(&[1.0, 0.0])]).unwrap();
        assert!(matches!(
            set.support_min(&v(&[1.0])),
            Err(RcmError::DimensionMismatch { .. })
        ));
    }

    fn rch_1d() -> Dataset {
        Dataset::from_rows(&[(&[3.0], 1), (&[-1.0], 1), (&[-3.0], -1), (&[1.0], -1)]).unwrap()
    }

    #[test]
    fn family_zero_eta() {
        let data = Dataset::from_rows(&[
            (&[1.0, 1.0], 1),
            (&[3.0, -1.0], 1),
            (&[-1.0, 0.0], -1),
            (&[-3.0, 2.0], -1),
        ])
        .unwrap();
        for kind in [FamilyKind::Ellipsoid, FamilyKind::Fda, FamilyKind::ReducedConvexHull] {
            let b = FamilyBuilder::from_dataset(kind, &data, 1e-6).unwrap();
            let pair = b.pair_at(0.0).unwrap();
            // Singleton centers: support is linear, equal to the center difference.
            for w in [v(&[1.0, 0.0]), v(&[0.3, -0.7]), v(&[-2.0, 1.0])] {
                let g = pair.g(&w).unwrap();
                let expect = (v(&[2.0, 0.0]) - v(&[-2.0, 1.0])).dot(&w);
                assert!((g - expect).abs() < 1e-12, "{kind:?}");
            }
        }
    }

    #[test]
    fn rch_native_conversion() {
        let b = FamilyBuilder::from_dataset(FamilyKind::ReducedConvexHull, &rch_1d(), 0.0).unwrap();
        assert_eq!(b.nu_max(), Some(1.0));
        let eta = b.eta_from_native(0.8).unwrap();
        assert!((eta - 0.2).abs() < 1e-15);
        assert!((b.native_from_eta(eta) - 0.8).abs() < 1e-15);
        assert!(matches!(b.eta_from_native(1.01), Err(RcmError::InfeasibleRch { .. })));
        assert!(matches!(b.eta_from_native(0.0), Err(RcmError::InvalidParameter(_))));
        // The sets at ν = 0.8 are [0.5, 1.5] and [-1.5, -0.5].
        let pair = b.pair_at(eta).unwrap();
        assert!((pair.g(&v(&[1.0])).unwrap() - 1.0).abs() < 1e-12);
        assert!((pair.g(&v(&[-1.0])).unwrap() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn ellipsoid_asymmetric_radii() {
        let data = Dataset::from_rows(&[(&[1.0, 0.0], 1), (&[-1.0, 0.0], -1)]).unwrap();
        let b = FamilyBuilder::from_dataset(FamilyKind::Ellipsoid, &data, 0.0).unwrap();
        assert!(b.ellipsoid_pair(0.5, 1.0).is_ok());
        let ch = FamilyBuilder::from_dataset(FamilyKind::ConvexHull, &data, 0.0).unwrap();
        assert!(ch.ellipsoid_pair(0.5, 1.0).is_err());
    }
}
