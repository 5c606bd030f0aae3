//! Versioned JSON schemas for persisted models and ReLU networks.
//! Numbers round-trip at full precision (shortest-exact decimal), so a
//! saved and reloaded model predicts bit-identically.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use pldc::{MaxAffine, Plane, PldcModel, ReluNet, Standardizer};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const NET_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct PlaneJson {
    pub slope: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PartsJson {
    pub phi1: Vec<PlaneJson>,
    pub phi2: Vec<PlaneJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StandardizerJson {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MetaJson {
    pub lambda: f64,
    pub rho: f64,
    pub loss: String,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub coupling: String,
}

/// On-disk model: one plane-list pair for regression/binary, one per class
/// for multiclass. The standardizer is shared.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub task: String,
    pub standardizer: Option<StandardizerJson>,
    pub classes: Option<Vec<String>>,
    pub models: Vec<PartsJson>,
    pub meta: Option<MetaJson>,
}

fn part_to_json(part: &MaxAffine) -> Vec<PlaneJson> {
    part.planes()
        .iter()
        .map(|p| PlaneJson {
            slope: p.slope.iter().copied().collect(),
            offset: p.offset,
        })
        .collect()
}

fn part_from_json(planes: &[PlaneJson]) -> CliResult<MaxAffine> {
    MaxAffine::new(
        planes
            .iter()
            .map(|p| Plane::new(DVector::from_column_slice(&p.slope), p.offset))
            .collect(),
    )
    .map_err(|e| CliError::Input(format!("model file: {e}")))
}

pub fn model_to_parts(model: &PldcModel) -> PartsJson {
    PartsJson {
        phi1: part_to_json(&model.phi1),
        phi2: part_to_json(&model.phi2),
    }
}

pub fn parts_to_model(
    parts: &PartsJson,
    standardizer: Option<Standardizer>,
) -> CliResult<PldcModel> {
    let model = PldcModel::new(part_from_json(&parts.phi1)?, part_from_json(&parts.phi2)?)
        .map_err(|e| CliError::Input(format!("model file: {e}")))?;
    Ok(model.with_standardizer(standardizer))
}

pub fn standardizer_to_json(s: &Standardizer) -> StandardizerJson {
    StandardizerJson {
        mean: s.mean.iter().copied().collect(),
        scale: s.scale.iter().copied().collect(),
    }
}

pub fn standardizer_from_json(s: &StandardizerJson) -> Standardizer {
    Standardizer {
        mean: DVector::from_column_slice(&s.mean),
        scale: DVector::from_column_slice(&s.scale),
    }
}

pub fn read_model_file(path: &str) -> CliResult<ModelFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.version != MODEL_FORMAT_VERSION {
        return Err(CliError::Input(format!(
            "{path}: unsupported model format version {}",
            file.version
        )));
    }
    if file.models.is_empty() {
        return Err(CliError::Input(format!("{path}: model file has no plane lists")));
    }
    Ok(file)
}

pub fn write_model_file(path: &str, file: &ModelFile) -> CliResult<()> {
    std::fs::write(path, serde_json::to_string_pretty(file)?)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NetFile {
    pub version: u32,
    /// Row-major hidden weight matrices.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub output: Vec<f64>,
}

pub fn net_to_file(net: &ReluNet) -> NetFile {
    NetFile {
        version: NET_FORMAT_VERSION,
        weights: net
            .weights()
            .iter()
            .map(|w| {
                (0..w.nrows())
                    .map(|r| w.row(r).iter().copied().collect())
                    .collect()
            })
            .collect(),
        output: net.output().iter().copied().collect(),
    }
}

pub fn net_from_file(file: &NetFile) -> CliResult<ReluNet> {
    if file.version != NET_FORMAT_VERSION {
        return Err(CliError::Input(format!(
            "unsupported network format version {}",
            file.version
        )));
    }
    let mut weights = Vec::with_capacity(file.weights.len());
    for (l, w) in file.weights.iter().enumerate() {
        let rows = w.len();
        let cols = w.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 || w.iter().any(|r| r.len() != cols) {
            return Err(CliError::Input(format!("network layer {l} is ragged or empty")));
        }
        weights.push(DMatrix::from_fn(rows, cols, |r, c| w[r][c]));
    }
    ReluNet::new(weights, DVector::from_column_slice(&file.output))
        .map_err(|e| CliError::Input(format!("network file: {e}")))
}
