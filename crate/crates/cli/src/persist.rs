//! Model and trace files.

use serde::{Deserialize, Serialize};

use rcm_core::model::{EtaMaxSummary, ParamValue, SolvePath};
use rcm_core::solver_convex::Regime;
use rcm_core::solver_nonconvex::SolveTrace;
use rcm_core::{BiasMethod, FamilyKind, TrainedModel, Vector};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamRecord {
    Pair { kappa_plus: f64, kappa_minus: f64 },
    Scalar(f64),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaMaxRecord {
    Value(f64),
    /// `"never_intersects"` or `"always_intersects"`.
    Status(String),
}

/// On-disk model. Floats are written in shortest round-trip form, so a
/// reload reproduces every bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub family: String,
    pub param: ParamRecord,
    pub eta_max: EtaMaxRecord,
    pub regime: String,
    pub w: Vec<f64>,
    pub b: f64,
    pub g_value: f64,
    pub bias_method: String,
    pub d: usize,
    pub solver_path: String,
}

impl ModelFile {
    pub fn from_model(m: &TrainedModel) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            family: m.family.name().to_string(),
            param: match m.param {
                ParamValue::None => ParamRecord::None,
                ParamValue::Scalar(p) => ParamRecord::Scalar(p),
                ParamValue::KappaPair(kappa_plus, kappa_minus) => ParamRecord::Pair {
                    kappa_plus,
                    kappa_minus,
                },
            },
            eta_max: match m.eta_max {
                EtaMaxSummary::Found(v) => EtaMaxRecord::Value(v),
                EtaMaxSummary::NeverIntersects => EtaMaxRecord::Status("never_intersects".into()),
                EtaMaxSummary::AlwaysIntersects => EtaMaxRecord::Status("always_intersects".into()),
            },
            regime: m.regime.name().to_string(),
            w: m.w.iter().copied().collect(),
            b: m.b,
            g_value: m.g_value,
            bias_method: m.bias_method.name().to_string(),
            d: m.dim(),
            solver_path: m.path.name().to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model record serializes");
        s.push('\n');
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let f: Self =
            serde_json::from_str(text).map_err(|e| CliError::Model(e.to_string()))?;
        if f.schema_version != SCHEMA_VERSION {
            return Err(CliError::Model(format!(
                "unsupported schema_version {}",
                f.schema_version
            )));
        }
        if f.w.len() != f.d {
            return Err(CliError::Model(format!(
                "w has {} entries, d = {}",
                f.w.len(),
                f.d
            )));
        }
        Ok(f)
    }

    pub fn to_model(&self) -> Result<TrainedModel, CliError> {
        let bad = |what: &str, v: &str| CliError::Model(format!("unknown {what} {v:?}"));
        let family: FamilyKind = self.family.parse().map_err(|_| bad("family", &self.family))?;
        let regime: Regime = self.regime.parse().map_err(|_| bad("regime", &self.regime))?;
        let bias_method: BiasMethod = self
            .bias_method
            .parse()
            .map_err(|_| bad("bias_method", &self.bias_method))?;
        let path = match self.solver_path.as_str() {
            "convex" => SolvePath::Convex,
            "boundary" => SolvePath::Boundary,
            "local_search" => SolvePath::LocalSearch,
            other => return Err(bad("solver_path", other)),
        };
        let eta_max = match &self.eta_max {
            EtaMaxRecord::Value(v) => EtaMaxSummary::Found(*v),
            EtaMaxRecord::Status(s) if s == "never_intersects" => EtaMaxSummary::NeverIntersects,
            EtaMaxRecord::Status(s) if s == "always_intersects" => EtaMaxSummary::AlwaysIntersects,
            EtaMaxRecord::Status(s) => return Err(bad("eta_max", s)),
        };
        let param = match self.param {
            ParamRecord::None => ParamValue::None,
            ParamRecord::Scalar(p) => ParamValue::Scalar(p),
            ParamRecord::Pair {
                kappa_plus,
                kappa_minus,
            } => ParamValue::KappaPair(kappa_plus, kappa_minus),
        };
        Ok(TrainedModel {
            w: Vector::from_column_slice(&self.w),
            b: self.b,
            family,
            param,
            eta_max,
            regime,
            g_value: self.g_value,
            per_class: None,
            bias_method,
            path,
            trace: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TraceRow {
    iteration: usize,
    w_tilde: Vec<f64>,
    w_hat: Vec<f64>,
    g_tilde: f64,
    g_hat: f64,
    step: f64,
    inner_steps: usize,
}

/// Trace as a JSON array of per-iteration records; empty for convex solves.
pub fn trace_json(trace: Option<&SolveTrace>) -> String {
    let rows: Vec<TraceRow> = trace
        .map(|t| {
            t.records
                .iter()
                .map(|r| TraceRow {
                    iteration: r.iteration,
                    w_tilde: r.w_tilde.iter().copied().collect(),
                    w_hat: r.w_hat.iter().copied().collect(),
                    g_tilde: r.g_tilde,
                    g_hat: r.g_hat,
                    step: r.step,
                    inner_steps: r.inner_steps,
                })
                .collect()
        })
        .unwrap_or_default();
    let mut s = serde_json::to_string_pretty(&rows).expect("trace serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rcm_core::model::{train, Param, TrainConfig};
    use rcm_core::Dataset;

    fn instance_a() -> Dataset {
        Dataset::from_rows(&[
            (&[1.0, 0.0], 1),
            (&[2.0, 1.0], 1),
            (&[-1.0, 0.0], -1),
            (&[-2.0, 1.0], -1),
        ])
        .unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let data = Dataset::from_rows(&[
            (&[0.1, 0.7], 1),
            (&[1.3, -0.2], 1),
            (&[-0.9, 0.3], -1),
            (&[-0.4, -1.1], -1),
        ])
        .unwrap();
        for kind in [FamilyKind::ConvexHull, FamilyKind::Ellipsoid, FamilyKind::Fda] {
            let m = train(&data, kind, Param::Auto, &TrainConfig::default()).unwrap();
            let f = ModelFile::from_model(&m);
            let back = ModelFile::parse(&f.to_json()).unwrap();
            assert_eq!(back, f);
            let m2 = back.to_model().unwrap();
            assert_eq!(m2.w, m.w);
            assert_eq!(m2.b.to_bits(), m.b.to_bits());
            assert_eq!(ModelFile::from_model(&m2).to_json(), f.to_json());
        }
    }

    #[test]
    fn fields_present() {
        let m = train(&instance_a(), FamilyKind::ConvexHull, Param::Auto, &TrainConfig::default())
            .unwrap();
        let v: serde_json::Value = serde_json::from_str(&ModelFile::from_model(&m).to_json()).unwrap();
        for key in [
            "schema_version",
            "family",
            "param",
            "eta_max",
            "regime",
            "w",
            "b",
            "g_value",
            "bias_method",
            "d",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["eta_max"], "never_intersects");
        assert_eq!(v["param"], serde_json::Value::Null);
    }

    #[test]
    fn rejects_bad_records() {
        assert!(matches!(ModelFile::parse("{}"), Err(CliError::Model(_))));
        let m = train(&instance_a(), FamilyKind::ConvexHull, Param::Auto, &TrainConfig::default())
            .unwrap();
        let mut f = ModelFile::from_model(&m);
        f.d = 3;
        assert!(ModelFile::parse(&f.to_json()).is_err());
        let mut f = ModelFile::from_model(&m);
        f.family = "svm".into();
        assert!(f.to_model().is_err());
    }

    #[test]
    fn empty_trace_is_an_array() {
        assert_eq!(trace_json(None).trim(), "[]");
    }
}
