//! JSON artifacts for accumulated statistics and fitted models.
//!
//! Numbers are written as shortest round-trip decimals, so reading a file back
//! reproduces every `f64` bit for bit. Symmetric matrices are stored as their
//! upper triangle, row-major. Infinite scores are written as the strings
//! `"inf"` / `"-inf"`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{FitResult, ModelKind};
use crate::linalg::SymMatrix;
use crate::pipeline::AnyStats;
use crate::suffstats::{BoxCoxStats, LinRegStats, WeightedStats};

pub const SCHEMA_VERSION: u64 = 1;

/// Column roles recorded next to statistics and models.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub features: Vec<String>,
    pub intercept: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<String>,
}

impl ColumnMeta {
    pub fn from_schema(s: &crate::ingest::DatasetSchema) -> Self {
        Self { features: s.features.clone(), intercept: s.intercept, response: s.response.clone(), weight: s.weight.clone() }
    }
}

/// Statistics plus optional column metadata, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsArtifact {
    pub stats: AnyStats,
    pub columns: Option<ColumnMeta>,
}

impl StatsArtifact {
    /// Merges or subtracts, requiring matching column metadata when both sides carry it.
    pub fn combine(&self, other: &Self, subtracting: bool) -> Result<Self> {
        if let (Some(a), Some(b)) = (&self.columns, &other.columns) {
            if a.features != b.features || a.intercept != b.intercept {
                return Err(Error::Schema("statistics were computed over different columns".into()));
            }
        }
        if self.stats.p() != other.stats.p() {
            return Err(Error::DimensionMismatch { expected: self.stats.p(), found: other.stats.p() });
        }
        let stats = if subtracting { self.stats.subtract(&other.stats)? } else { self.stats.merge(&other.stats)? };
        Ok(Self { stats, columns: self.columns.clone().or_else(|| other.columns.clone()) })
    }
}

#[derive(Serialize, Deserialize)]
struct StatsFile {
    schema_version: u64,
    #[serde(flatten)]
    body: StatsBody,
    p: usize,
    n: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    columns: Option<ColumnMeta>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "model_kind", rename_all = "lowercase")]
enum StatsBody {
    #[serde(alias = "ridge")]
    Linear { s_yy: f64, s_xy: Vec<f64>, s_xx: Vec<f64> },
    Weighted { s_wyy: f64, s_wxy: Vec<f64>, s_wxx: Vec<f64> },
    Boxcox { grid: Vec<f64>, s_logy: f64, s_cyy: Vec<f64>, s_cxy: Vec<Vec<f64>>, s_xx: Vec<f64> },
}

fn ensure_finite<'a>(what: &str, vals: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if vals.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn stats_to_json(a: &StatsArtifact) -> Result<String> {
    let body = match &a.stats {
        AnyStats::Linear(s) => StatsBody::Linear { s_yy: s.s_yy(), s_xy: s.s_xy().to_vec(), s_xx: s.s_xx().packed_upper() },
        AnyStats::Weighted(s) => {
            StatsBody::Weighted { s_wyy: s.s_wyy(), s_wxy: s.s_wxy().to_vec(), s_wxx: s.s_wxx().packed_upper() }
        }
        AnyStats::BoxCox(s) => StatsBody::Boxcox {
            grid: s.grid().to_vec(),
            s_logy: s.s_logy(),
            s_cyy: (0..s.grid().len()).map(|k| s.s_cyy(k)).collect(),
            s_cxy: (0..s.grid().len()).map(|k| s.s_cxy(k).to_vec()).collect(),
            s_xx: s.s_xx().packed_upper(),
        },
    };
    match &body {
        StatsBody::Linear { s_yy, s_xy, s_xx } => ensure_finite("statistics", std::iter::once(s_yy).chain(s_xy).chain(s_xx))?,
        StatsBody::Weighted { s_wyy, s_wxy, s_wxx } => {
            ensure_finite("statistics", std::iter::once(s_wyy).chain(s_wxy).chain(s_wxx))?
        }
        StatsBody::Boxcox { s_logy, s_cyy, s_cxy, s_xx, .. } => ensure_finite(
            "statistics",
            std::iter::once(s_logy).chain(s_cyy).chain(s_cxy.iter().flatten()).chain(s_xx),
        )?,
    }
    let file = StatsFile {
        schema_version: SCHEMA_VERSION,
        body,
        p: a.stats.p(),
        n: a.stats.n(),
        columns: a.columns.clone(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

fn check_version(v: &serde_json::Value) -> Result<()> {
    let found = v
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Malformed("missing schema_version".into()))?;
    if found != SCHEMA_VERSION {
        return Err(Error::VersionMismatch { found, expected: SCHEMA_VERSION });
    }
    Ok(())
}

fn parse_value(text: &str) -> Result<serde_json::Value> {
    serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
}

pub fn stats_from_json(text: &str) -> Result<StatsArtifact> {
    let v = parse_value(text)?;
    check_version(&v)?;
    let f: StatsFile = serde_json::from_value(v).map_err(|e| Error::Malformed(e.to_string()))?;
    let p = f.p;
    let sym = |packed: &[f64]| SymMatrix::from_packed_upper(p, packed).map_err(|e| Error::Malformed(e.to_string()));
    let stats = match f.body {
        StatsBody::Linear { s_yy, s_xy, s_xx } => AnyStats::Linear(LinRegStats::from_parts(f.n, s_yy, s_xy, sym(&s_xx)?)?),
        StatsBody::Weighted { s_wyy, s_wxy, s_wxx } => {
            AnyStats::Weighted(WeightedStats::from_parts(f.n, s_wyy, s_wxy, sym(&s_wxx)?)?)
        }
        StatsBody::Boxcox { grid, s_logy, s_cyy, s_cxy, s_xx } => {
            AnyStats::BoxCox(BoxCoxStats::from_parts(f.n, grid, s_logy, s_cyy, s_cxy, sym(&s_xx)?)?)
        }
    };
    if let Some(c) = &f.columns {
        if c.features.len() + usize::from(c.intercept) != p {
            return Err(Error::Malformed("column metadata does not match p".into()));
        }
    }
    Ok(StatsArtifact { stats, columns: f.columns })
}

pub fn write_ss(path: impl AsRef<Path>, a: &StatsArtifact) -> Result<()> {
    fs::write(path, stats_to_json(a)? + "\n")?;
    Ok(())
}

pub fn read_ss(path: impl AsRef<Path>) -> Result<StatsArtifact> {
    stats_from_json(&fs::read_to_string(path)?)
}

mod score_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("invalid score `{other}`"))),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

/// On-disk form of a [`FitResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u64,
    pub model_kind: String,
    pub params: ModelParams,
    pub beta: Vec<f64>,
    pub sigma2: f64,
    /// Upper triangle of the coefficient covariance, row-major.
    pub cov: Vec<f64>,
    pub n: u64,
    pub p: usize,
    #[serde(with = "score_repr")]
    pub score: f64,
    pub used_generalized_inverse: bool,
    #[serde(default)]
    pub degenerate: bool,
    pub column_names: Vec<String>,
    pub intercept_flag: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
}

impl ModelArtifact {
    pub fn from_fit(fit: &FitResult<f64>, columns: &ColumnMeta) -> Self {
        let params = match fit.kind {
            ModelKind::BoxCox => ModelParams { c: fit.param, lambda: None },
            ModelKind::Ridge => ModelParams { c: None, lambda: fit.param },
            _ => ModelParams::default(),
        };
        Self {
            schema_version: SCHEMA_VERSION,
            model_kind: fit.kind.as_str().to_string(),
            params,
            beta: fit.beta.clone(),
            sigma2: fit.sigma2,
            cov: fit.cov.packed_upper(),
            n: fit.n,
            p: fit.p,
            score: fit.score,
            used_generalized_inverse: fit.used_generalized_inverse,
            degenerate: fit.degenerate,
            column_names: columns.features.clone(),
            intercept_flag: columns.intercept,
            response: columns.response.clone(),
        }
    }

    pub fn to_fit(&self) -> Result<FitResult<f64>> {
        let kind: ModelKind = self.model_kind.parse()?;
        if self.beta.len() != self.p || self.column_names.len() + usize::from(self.intercept_flag) != self.p {
            return Err(Error::Malformed("model dimensions are inconsistent".into()));
        }
        let param = match kind {
            ModelKind::BoxCox => Some(self.params.c.ok_or_else(|| Error::Malformed("Box-Cox model without c".into()))?),
            ModelKind::Ridge => {
                Some(self.params.lambda.ok_or_else(|| Error::Malformed("ridge model without lambda".into()))?)
            }
            _ => None,
        };
        Ok(FitResult {
            kind,
            param,
            beta: self.beta.clone(),
            sigma2: self.sigma2,
            cov: SymMatrix::from_packed_upper(self.p, &self.cov).map_err(|e| Error::Malformed(e.to_string()))?,
            n: self.n,
            p: self.p,
            score: self.score,
            used_generalized_inverse: self.used_generalized_inverse,
            degenerate: self.degenerate,
        })
    }

    pub fn columns(&self) -> ColumnMeta {
        ColumnMeta {
            features: self.column_names.clone(),
            intercept: self.intercept_flag,
            response: self.response.clone(),
            weight: None,
        }
    }
}

pub fn write_model(path: impl AsRef<Path>, m: &ModelArtifact) -> Result<()> {
    ensure_finite("model", m.beta.iter().chain(&m.cov).chain(std::iter::once(&m.sigma2)))?;
    fs::write(path, serde_json::to_string_pretty(m)? + "\n")?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<ModelArtifact> {
    let v = parse_value(&fs::read_to_string(path)?)?;
    check_version(&v)?;
    let m: ModelArtifact = serde_json::from_value(v).map_err(|e| Error::Malformed(e.to_string()))?;
    m.to_fit()?;
    Ok(m)
}
