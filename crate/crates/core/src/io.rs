//! JSON model and report files.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays of them. Floats are written with round-trip precision, so parsing
//! a serialized report reproduces it exactly.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::decomposition::{DecompositionReport, EnclosureRecord, RecurrentPath, TimeMode, VerificationRecord};
use crate::error::{Error, Result};
use crate::identifiability::{CrossCheckRecord, IdentifiabilityReport, QndModel, QndUniquenessRecord};
use crate::linalg::{CMatrix, Projector, Tolerances, C64};
use crate::oqrw::{OqrwComparison, RateMatrix, OQRW_CONVENTION};
use crate::semigroup::{Diagnostics, KrausChannel, LindbladModel, VECTORIZATION_CONVENTION};

/// Row-major complex matrix as nested `[re, im]` arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixData(pub Vec<Vec<C64>>);

impl MatrixData {
    pub fn to_matrix(&self, field: &str) -> Result<CMatrix> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, Vec::len);
        if let Some((i, r)) = self.0.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::DimensionMismatch(format!(
                "{field}: row {i} has {} entries, row 0 has {cols}",
                r.len()
            )));
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| self.0[i][j]))
    }

    fn square(&self, field: &str, dim: usize) -> Result<CMatrix> {
        let m = self.to_matrix(field)?;
        if m.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch(format!(
                "{field} is {}x{}, expected {dim}x{dim}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(m)
    }
}

impl From<&CMatrix> for MatrixData {
    fn from(m: &CMatrix) -> Self {
        MatrixData(m.row_iter().map(|r| r.iter().copied().collect()).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    Lindblad,
    Kraus,
    Rates,
    Qnd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QndSection {
    pub energies: Vec<f64>,
    /// `amplitudes[channel][pointer]`.
    pub amplitudes: Vec<Vec<C64>>,
    /// Number of leading diffusive channels.
    pub p: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub mode: ModelMode,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<MatrixData>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jumps: Vec<MatrixData>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub kraus: Vec<MatrixData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qnd: Option<QndSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A parsed, validated model.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Lindblad(LindbladModel),
    Kraus(KrausChannel),
    Rates(RateMatrix),
    Qnd(QndModel),
}

/// Deserializes JSON, naming the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut de = serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            path,
            line: inner.line(),
            column: inner.column(),
            message: bare_message(&inner),
        }
    })?;
    de.end().map_err(|e| Error::Parse {
        path: ".".into(),
        line: e.line(),
        column: e.column(),
        message: bare_message(&e),
    })?;
    Ok(value)
}

/// Error text without the position suffix, which is reported separately.
fn bare_message(e: &serde_json::Error) -> String {
    let text = e.to_string();
    let suffix = format!(" at line {} column {}", e.line(), e.column());
    text.strip_suffix(&suffix).unwrap_or(&text).to_string()
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    fn missing(&self, field: &str) -> Error {
        Error::ModeMismatch(format!("mode {:?} requires the `{field}` field", self.mode))
    }

    /// Builds the model the file describes, checking every shape against `dim`.
    pub fn to_model(&self, tol: &Tolerances) -> Result<Model> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::DimensionMismatch("dim must be positive".into()));
        }
        match self.mode {
            ModelMode::Lindblad => {
                let h = match &self.hamiltonian {
                    Some(h) => h.square("hamiltonian", n)?,
                    None => CMatrix::zeros(n, n),
                };
                let jumps = self
                    .jumps
                    .iter()
                    .enumerate()
                    .map(|(k, l)| l.square(&format!("jumps[{k}]"), n))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Model::Lindblad(LindbladModel::new(h, jumps, tol)?))
            }
            ModelMode::Kraus => {
                if self.kraus.is_empty() {
                    return Err(self.missing("kraus"));
                }
                let ops = self
                    .kraus
                    .iter()
                    .enumerate()
                    .map(|(k, v)| v.square(&format!("kraus[{k}]"), n))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Model::Kraus(KrausChannel::checked(ops, tol)?))
            }
            ModelMode::Rates => {
                let rows = self.rates.as_ref().ok_or_else(|| self.missing("rates"))?;
                if rows.len() != n {
                    return Err(Error::DimensionMismatch(format!("rates has {} rows, dim is {n}", rows.len())));
                }
                Ok(Model::Rates(RateMatrix::from_rows(rows, tol)?))
            }
            ModelMode::Qnd => {
                let q = self.qnd.as_ref().ok_or_else(|| self.missing("qnd"))?;
                if q.energies.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "qnd.energies has {} entries, dim is {n}",
                        q.energies.len()
                    )));
                }
                Ok(Model::Qnd(QndModel::new(q.energies.clone(), q.amplitudes.clone(), q.p)?))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectorData {
    pub rank: usize,
    pub matrix: MatrixData,
}

impl From<&Projector> for ProjectorData {
    fn from(p: &Projector) -> Self {
        Self {
            rank: p.rank(),
            matrix: p.matrix().into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnclosureData {
    pub dimension: usize,
    pub projector: MatrixData,
    pub extremal_state: MatrixData,
}

impl From<&EnclosureRecord> for EnclosureData {
    fn from(e: &EnclosureRecord) -> Self {
        Self {
            dimension: e.dimension,
            projector: e.projector.matrix().into(),
            extremal_state: e.extremal_state.matrix().into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsometryData {
    pub from: usize,
    pub to: usize,
    pub q: MatrixData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyData {
    pub members: Vec<EnclosureData>,
    pub isometries: Vec<IsometryData>,
    pub block_projector: MatrixData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionData {
    pub dim: usize,
    pub time_mode: TimeMode,
    pub shape: String,
    pub is_unique: bool,
    pub recurrent_path: RecurrentPath,
    pub transient: ProjectorData,
    pub recurrent: ProjectorData,
    pub unique_enclosures: Vec<EnclosureData>,
    pub families: Vec<FamilyData>,
    pub residuals: BTreeMap<String, f64>,
}

impl From<&DecompositionReport> for DecompositionData {
    fn from(r: &DecompositionReport) -> Self {
        Self {
            dim: r.dim,
            time_mode: r.time_mode,
            shape: r.shape(),
            is_unique: r.is_unique,
            recurrent_path: r.recurrent_path,
            transient: (&r.transient).into(),
            recurrent: (&r.recurrent).into(),
            unique_enclosures: r.unique_enclosures.iter().map(Into::into).collect(),
            families: r
                .families
                .iter()
                .map(|f| FamilyData {
                    members: f.members.iter().map(Into::into).collect(),
                    isometries: f
                        .isometries
                        .iter()
                        .map(|i| IsometryData {
                            from: i.from,
                            to: i.to,
                            q: (&i.q).into(),
                        })
                        .collect(),
                    block_projector: f.block_projector.matrix().into(),
                })
                .collect(),
            residuals: r.residuals.clone(),
        }
    }
}

/// Self-describing analysis output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub vectorization: String,
    pub oqrw_convention: String,
    pub tolerances: Tolerances,
    pub seed: u64,
    /// Overall verdict of the command.
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<DecompositionData>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<VerificationRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identifiability: Option<IdentifiabilityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<CrossCheckRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qnd: Option<QndUniquenessRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oqrw: Option<OqrwComparison>,
}

impl ReportFile {
    pub fn new(command: &str, tol: &Tolerances, seed: u64) -> Self {
        Self {
            tool: "enclosure-atlas".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            vectorization: VECTORIZATION_CONVENTION.into(),
            oqrw_convention: OQRW_CONVENTION.into(),
            tolerances: *tol,
            seed,
            passed: true,
            notes: Vec::new(),
            diagnostics: None,
            decomposition: None,
            verification: None,
            identifiability: None,
            cross_check: None,
            qnd: None,
            oqrw: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}
