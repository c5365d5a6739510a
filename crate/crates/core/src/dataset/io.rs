//! On-disk dataset format.
//!
//! A dataset is a JSON manifest listing one delimited numeric text file per
//! modality (rows = variables, columns = observations, comma-separated) plus
//! an optional sidecar mask file of 0/1 values with identical shape. Missing
//! entries may alternatively be written as the literal token `nan` in the
//! values file; the loader masks those entries. When both encodings are
//! present the masks are combined (an entry is observed only if both agree).

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::{GroupedDataset, ModalityMatrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub modalities: Vec<ModalityFiles>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModalityFiles {
    pub name: String,
    pub values: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
}

fn parse_error(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// Writes a numeric matrix as comma-separated rows.
pub fn write_matrix_csv<T: Real>(path: &Path, matrix: &DMatrix<T>) -> Result<()> {
    let mut out = String::new();
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{}", matrix[(i, j)].as_f64()));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a comma-separated numeric matrix; `nan` tokens become NaN values.
pub fn load_matrix_csv<T: Real>(path: &Path) -> Result<DMatrix<T>> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<T>, Error> = line
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                tok.parse::<f64>()
                    .map(T::of)
                    .map_err(|_| parse_error(path, format!("bad number `{tok}` on line {}", lineno + 1)))
            })
            .collect();
        rows.push(row?);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(parse_error(path, "ragged rows"));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Writes one values + mask file pair per modality and a JSON manifest
/// (`dataset.json`) into `dir`; returns the manifest path. Masked entries are
/// written as `nan` in the values file and `0` in the mask file.
pub fn write_dataset<T: Real>(dir: &Path, data: &GroupedDataset<T>) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(data.n_modalities());
    for m in data.modalities() {
        let values_name = format!("values_{}.csv", m.name());
        let mask_name = format!("mask_{}.csv", m.name());
        let mut values = String::new();
        let mut mask = String::new();
        for j in 0..m.n_vars() {
            for n in 0..m.n_obs() {
                if n > 0 {
                    values.push(',');
                    mask.push(',');
                }
                match m.get(j, n) {
                    Some(v) => {
                        values.push_str(&format!("{}", v.as_f64()));
                        mask.push('1');
                    }
                    None => {
                        values.push_str("nan");
                        mask.push('0');
                    }
                }
            }
            values.push('\n');
            mask.push('\n');
        }
        fs::write(dir.join(&values_name), values)?;
        fs::write(dir.join(&mask_name), mask)?;
        entries.push(ModalityFiles {
            name: m.name().to_string(),
            values: PathBuf::from(values_name),
            mask: Some(PathBuf::from(mask_name)),
        });
    }
    let manifest = DatasetManifest {
        modalities: entries,
    };
    let manifest_path = dir.join("dataset.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| parse_error(&manifest_path, e.to_string()))?;
    fs::write(&manifest_path, json)?;
    Ok(manifest_path)
}

/// Loads a dataset from its manifest. Relative file paths resolve against the
/// manifest's directory.
pub fn load_dataset<T: Real>(manifest_path: &Path) -> Result<GroupedDataset<T>> {
    let text = fs::read_to_string(manifest_path)?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| parse_error(manifest_path, e.to_string()))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let mut modalities = Vec::with_capacity(manifest.modalities.len());
    for entry in &manifest.modalities {
        let values_path = base.join(&entry.values);
        let values: DMatrix<T> = load_matrix_csv(&values_path)?;
        let mut mask = DMatrix::from_fn(values.nrows(), values.ncols(), |i, j| {
            values[(i, j)].as_f64().is_finite()
        });
        if let Some(mask_file) = &entry.mask {
            let mask_path = base.join(mask_file);
            let mask_values: DMatrix<T> = load_matrix_csv(&mask_path)?;
            if mask_values.shape() != values.shape() {
                return Err(parse_error(&mask_path, "mask shape differs from values"));
            }
            for i in 0..mask.nrows() {
                for j in 0..mask.ncols() {
                    mask[(i, j)] &= mask_values[(i, j)] != T::zero();
                }
            }
        }
        modalities.push(ModalityMatrix::new(entry.name.clone(), values, mask)?);
    }
    GroupedDataset::new(modalities)
}
