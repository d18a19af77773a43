//! JSON ingestion for plants and catalog data files.
//!
//! A plant file is an object with `"name"` and the matrix keys `"A"`, `"B1"`,
//! `"B"`, `"C1"`, `"C"`, `"D11"`, `"D12"`, each a row-major array of rows.
//! `A`, `B` and `C` are required; the others default to zero blocks whose
//! sizes are inferred from whatever is present.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::control::PlantModel;
use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows};

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlantFile {
    #[serde(default)]
    name: Option<String>,
    #[serde(rename = "A")]
    a: Option<Rows>,
    #[serde(rename = "B1", default)]
    b1: Option<Rows>,
    #[serde(rename = "B")]
    b: Option<Rows>,
    #[serde(rename = "C1", default)]
    c1: Option<Rows>,
    #[serde(rename = "C")]
    c: Option<Rows>,
    #[serde(rename = "D11", default)]
    d11: Option<Rows>,
    #[serde(rename = "D12", default)]
    d12: Option<Rows>,
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, context: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        context: context.to_string(),
        message: format!("line {}, column {}: {e}", e.line(), e.column()),
    })
}

/// Matrix with a known column count even when it has no rows.
fn matrix(rows: &Rows, name: &str, cols_if_empty: usize) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, cols_if_empty));
    }
    matrix_from_rows(rows, name)
}

fn required(m: &Option<Rows>, name: &str, context: &str) -> Result<Rows> {
    m.clone().ok_or_else(|| Error::Parse {
        context: context.to_string(),
        message: format!("required matrix `{name}` is missing"),
    })
}

pub fn parse_plant(text: &str, context: &str) -> Result<PlantModel> {
    let file: PlantFile = parse_json(text, context)?;
    let a = matrix_from_rows(&required(&file.a, "A", context)?, "A")?;
    let n = a.nrows();
    let b = matrix(&required(&file.b, "B", context)?, "B", 0)?;
    let c = matrix(&required(&file.c, "C", context)?, "C", n)?;
    let nu = b.ncols();

    let d11 = file.d11.as_ref().map(|r| matrix(r, "D11", 0)).transpose()?;
    let d12 = file.d12.as_ref().map(|r| matrix(r, "D12", nu)).transpose()?;
    let b1 = file.b1.as_ref().map(|r| matrix(r, "B1", 0)).transpose()?;
    let c1 = file.c1.as_ref().map(|r| matrix(r, "C1", n)).transpose()?;

    let nw = b1.as_ref().map(DMatrix::ncols).or(d11.as_ref().map(DMatrix::ncols)).unwrap_or(0);
    let nz = c1
        .as_ref()
        .map(DMatrix::nrows)
        .or(d11.as_ref().map(DMatrix::nrows))
        .or(d12.as_ref().map(DMatrix::nrows))
        .unwrap_or(0);
    let plant = PlantModel {
        name: file.name.unwrap_or_else(|| "plant".to_string()),
        a,
        b1: b1.unwrap_or_else(|| DMatrix::zeros(n, nw)),
        b,
        c1: c1.unwrap_or_else(|| DMatrix::zeros(nz, n)),
        c,
        d11: d11.unwrap_or_else(|| DMatrix::zeros(nz, nw)),
        d12: d12.unwrap_or_else(|| DMatrix::zeros(nz, nu)),
    };
    plant.validate()?;
    Ok(plant)
}

pub fn load_plant(path: impl AsRef<Path>) -> Result<PlantModel> {
    let path = path.as_ref();
    parse_plant(&fs::read_to_string(path)?, &path.display().to_string())
}

pub fn plant_to_json(plant: &PlantModel) -> String {
    let file = PlantFile {
        name: Some(plant.name.clone()),
        a: Some(matrix_to_rows(&plant.a)),
        b1: Some(matrix_to_rows(&plant.b1)),
        b: Some(matrix_to_rows(&plant.b)),
        c1: Some(matrix_to_rows(&plant.c1)),
        c: Some(matrix_to_rows(&plant.c)),
        d11: Some(matrix_to_rows(&plant.d11)),
        d12: Some(matrix_to_rows(&plant.d12)),
    };
    serde_json::to_string_pretty(&file).expect("plant serializes")
}

pub fn save_plant(plant: &PlantModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, plant_to_json(plant) + "\n")?;
    Ok(())
}

/// Named matrices and scalars for a catalog problem whose plant data is not
/// bundled, e.g. `{"name": "st", "matrices": {"A1": [[...]]}, "scalars": {"mu": 0.1}}`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CatalogData {
    pub name: String,
    pub matrices: BTreeMap<String, DMatrix<f64>>,
    pub scalars: BTreeMap<String, f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    #[serde(default)]
    name: String,
    #[serde(default)]
    matrices: BTreeMap<String, Rows>,
    #[serde(default)]
    scalars: BTreeMap<String, f64>,
}

impl CatalogData {
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let file: CatalogFile = parse_json(text, context)?;
        let mut matrices = BTreeMap::new();
        for (k, rows) in &file.matrices {
            matrices.insert(k.clone(), matrix_from_rows(rows, k)?);
        }
        Ok(Self { name: file.name, matrices, scalars: file.scalars })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path)?, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        let file = CatalogFile {
            name: self.name.clone(),
            matrices: self.matrices.iter().map(|(k, m)| (k.clone(), matrix_to_rows(m))).collect(),
            scalars: self.scalars.clone(),
        };
        serde_json::to_string_pretty(&file).expect("catalog data serializes")
    }

    pub fn with_matrix(mut self, name: &str, m: DMatrix<f64>) -> Self {
        self.matrices.insert(name.to_string(), m);
        self
    }

    pub fn with_scalar(mut self, name: &str, v: f64) -> Self {
        self.scalars.insert(name.to_string(), v);
        self
    }

    pub fn matrix(&self, name: &str) -> Result<&DMatrix<f64>> {
        self.matrices
            .get(name)
            .ok_or_else(|| Error::MissingData(format!("`{}` needs matrix `{name}`", self.name)))
    }

    /// A scalar given either under `scalars` or as a 1×1 matrix.
    pub fn scalar(&self, name: &str) -> Result<f64> {
        if let Some(v) = self.scalars.get(name) {
            return Ok(*v);
        }
        match self.matrices.get(name) {
            Some(m) if m.shape() == (1, 1) => Ok(m[(0, 0)]),
            _ => Err(Error::MissingData(format!("`{}` needs scalar `{name}`", self.name))),
        }
    }

    pub fn scalar_or(&self, name: &str, default: f64) -> f64 {
        self.scalar(name).unwrap_or(default)
    }
}
