//! JSON file formats for plants and synthesized controllers.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Plant;
use crate::retrofit::RetrofitController;
use crate::statespace::Realization;

/// Signal dimensions of a plant file.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlantDims {
    pub v: usize,
    pub w: usize,
    pub u: usize,
    pub y: usize,
}

/// On-disk plant description: state dimension, channel widths, and the five
/// system matrices as row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantFile {
    pub n: usize,
    pub dims: PlantDims,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Gamma")]
    pub gamma: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
}

/// Summary of the synthesis-time verification, stored alongside the
/// controller matrices. Verification commands recompute these rather than
/// trusting the file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictSummary {
    pub kg_yv_residual: f64,
    pub qhat_abscissa: f64,
    pub qhat_ghat_yv_abscissa: f64,
    pub pass: bool,
}

/// Synthesis metadata: the relative-degree profile, the output selectors,
/// the reordering transform, and the tolerances used.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerMetadata {
    pub relative_degrees: Vec<usize>,
    pub capped: Vec<bool>,
    /// Indices (into the reordered measurement) kept by the rectifier.
    pub p_indices: Vec<usize>,
    /// Indices (into the reordered measurement) used to reconstruct the
    /// interconnection input.
    pub pbar_indices: Vec<usize>,
    /// The output reordering transform, row-major.
    pub reorder: Vec<Vec<f64>>,
    pub tolerance: f64,
    pub margin: f64,
    pub verdict: VerdictSummary,
}

/// On-disk controller description: the assembled realization plus
/// metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControllerFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
    pub metadata: ControllerMetadata,
}

fn to_matrix(rows: usize, cols: usize, data: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    if data.len() != rows {
        return Err(Error::Model(format!(
            "{name}: expected {rows} rows, found {}",
            data.len()
        )));
    }
    let mut out = DMatrix::zeros(rows, cols);
    for (i, row) in data.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::Model(format!(
                "{name}: row {i} has {} entries, expected {cols}",
                row.len()
            )));
        }
        for (j, &value) in row.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::Model(format!(
                    "{name}: entry ({i}, {j}) is not finite"
                )));
            }
            out[(i, j)] = value;
        }
    }
    Ok(out)
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl PlantFile {
    pub fn from_plant(plant: &Plant) -> Self {
        Self {
            n: plant.n(),
            dims: PlantDims {
                v: plant.v_dim(),
                w: plant.w_dim(),
                u: plant.u_dim(),
                y: plant.y_dim(),
            },
            a: to_rows(plant.a()),
            l: to_rows(plant.l()),
            b: to_rows(plant.b()),
            gamma: to_rows(plant.gamma()),
            c: to_rows(plant.c()),
        }
    }

    pub fn into_plant(&self) -> Result<Plant> {
        let n = self.n;
        let a = to_matrix(n, n, &self.a, "A")?;
        let l = to_matrix(n, self.dims.v, &self.l, "L")?;
        let b = to_matrix(n, self.dims.u, &self.b, "B")?;
        let gamma = to_matrix(self.dims.w, n, &self.gamma, "Gamma")?;
        let c = to_matrix(self.dims.y, n, &self.c, "C")?;
        Plant::new(a, l, b, gamma, c)
    }

    pub fn load(path: &Path) -> Result<Plant> {
        let text = std::fs::read_to_string(path)?;
        let file: PlantFile = serde_json::from_str(&text)?;
        file.into_plant()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, to_canonical_json(self)?)?;
        Ok(())
    }
}

impl ControllerFile {
    pub fn from_controller(ctrl: &RetrofitController, tolerance: f64, margin: f64) -> Self {
        let m = ctrl.rect.coords.m();
        let p = ctrl.rect.profile.r.len();
        Self {
            a: to_rows(ctrl.k.a()),
            b: to_rows(ctrl.k.b()),
            c: to_rows(ctrl.k.c()),
            d: to_rows(ctrl.k.d()),
            metadata: ControllerMetadata {
                relative_degrees: ctrl.rect.profile.r.clone(),
                capped: ctrl.rect.profile.capped.clone(),
                p_indices: (m..p).collect(),
                pbar_indices: (0..m).collect(),
                reorder: to_rows(&ctrl.rect.profile.t),
                tolerance,
                margin,
                verdict: VerdictSummary {
                    kg_yv_residual: ctrl.kg_yv_residual,
                    qhat_abscissa: ctrl.qhat_abscissa,
                    qhat_ghat_yv_abscissa: ctrl.qhat_ghat_yv_abscissa,
                    pass: true,
                },
            },
        }
    }

    /// The stored controller realization.
    pub fn into_realization(&self) -> Result<Realization> {
        let n = self.a.len();
        // a static controller has no B rows; the input width then comes
        // from the feedthrough
        let p_in = self
            .b
            .first()
            .map(Vec::len)
            .or_else(|| self.d.first().map(Vec::len))
            .unwrap_or(0);
        let q_out = self.c.len();
        let a = to_matrix(n, n, &self.a, "A")?;
        let b = to_matrix(n, p_in, &self.b, "B")?;
        let c = to_matrix(q_out, n, &self.c, "C")?;
        let d = to_matrix(q_out, p_in, &self.d, "D")?;
        Realization::new(a, b, c, d)
    }

    pub fn load(path: &Path) -> Result<ControllerFile> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, to_canonical_json(self)?)?;
        Ok(())
    }
}

/// Pretty-printed JSON with a trailing newline; field order follows the
/// struct definitions, so identical data serializes to identical bytes.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn plant_round_trip() {
        let plant = fixtures::stable4();
        let file = PlantFile::from_plant(&plant);
        let text = to_canonical_json(&file).unwrap();
        let parsed: PlantFile = serde_json::from_str(&text).unwrap();
        let back = parsed.into_plant().unwrap();
        assert_eq!(plant, back);
        // determinism
        assert_eq!(text, to_canonical_json(&PlantFile::from_plant(&back)).unwrap());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let plant = fixtures::stable4();
        let mut file = PlantFile::from_plant(&plant);
        file.a[0].pop();
        assert!(matches!(file.into_plant(), Err(Error::Model(_))));
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let plant = fixtures::stable4();
        let mut file = PlantFile::from_plant(&plant);
        file.c[0][0] = f64::NAN;
        assert!(matches!(file.into_plant(), Err(Error::Model(_))));
        // literal NaN is not valid JSON either
        assert!(serde_json::from_str::<PlantFile>("{\"n\": NaN}").is_err());
    }
}
