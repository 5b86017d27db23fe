//! Dataset ingestion: feature/label files, the dataset manifest, and shape
//! validation.
//!
//! Features are consumed as precomputed vectors (e.g. penultimate-layer CNN
//! activations exported by some other tool); this crate never touches images.
//! Two feature encodings are supported, selected by file extension:
//!
//! * `.csv` — headerless rows of decimal floats.
//! * `.bin` — 8-byte magic `CLTMFEAT`, two little-endian `u64` dims
//!   (rows, cols), then row-major little-endian `f64` values.
//!
//! Labels are headerless CSV of strict `{0,1}` integers; scene ids are one
//! nonnegative integer per row.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const FEATURE_MAGIC: &[u8; 8] = b"CLTMFEAT";

/// In-memory dataset: `n` feature vectors with `n` binary label vectors,
/// plus optional held-out scene ids and train/validation split indices.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Vec<bool>>,
    pub label_names: Vec<String>,
    pub scenes: Option<Vec<usize>>,
    pub train_indices: Option<Vec<usize>>,
    pub val_indices: Option<Vec<usize>>,
}

impl LabeledDataset {
    pub fn n(&self) -> usize {
        self.features.len()
    }

    pub fn dims(&self) -> usize {
        self.features.first().map_or(0, |r| r.len())
    }

    pub fn label_count(&self) -> usize {
        self.label_names.len()
    }

    /// Rows restricted to an index subset (used for train/val splits).
    pub fn subset(&self, indices: &[usize]) -> Result<LabeledDataset> {
        for &i in indices {
            if i >= self.n() {
                return Err(Error::InvalidInput(format!("subset index {i} out of range")));
            }
        }
        Ok(LabeledDataset {
            features: indices.iter().map(|&i| self.features[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            label_names: self.label_names.clone(),
            scenes: self
                .scenes
                .as_ref()
                .map(|s| indices.iter().map(|&i| s[i]).collect()),
            train_indices: None,
            val_indices: None,
        })
    }

    /// Per-label frequency of the positive class.
    pub fn label_frequencies(&self) -> Vec<f64> {
        let n = self.n().max(1) as f64;
        (0..self.label_count())
            .map(|k| self.labels.iter().filter(|row| row[k]).count() as f64 / n)
            .collect()
    }

    /// Labels that never vary (all 0 or all 1); unusable for distance
    /// estimation.
    pub fn constant_labels(&self) -> Vec<usize> {
        (0..self.label_count())
            .filter(|&k| {
                let ones = self.labels.iter().filter(|row| row[k]).count();
                ones == 0 || ones == self.n()
            })
            .collect()
    }
}

/// On-disk description of a dataset. Paths are resolved relative to the
/// manifest file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub features: String,
    pub labels: String,
    pub label_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenes: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_indices: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_indices: Option<Vec<usize>>,
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parse a headerless CSV of floats, enforcing a fixed column count.
pub fn read_feature_csv(path: &Path, expect_cols: usize) -> Result<Vec<Vec<f64>>> {
    let text = read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(expect_cols);
        for (col, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Format(format!(
                    "{}: row {} col {}: not a float: {:?}",
                    path.display(),
                    lineno + 1,
                    col + 1,
                    field.trim()
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::Format(format!(
                    "{}: row {} col {}: non-finite feature value",
                    path.display(),
                    lineno + 1,
                    col + 1
                )));
            }
            row.push(v);
        }
        if row.len() != expect_cols {
            return Err(Error::Format(format!(
                "{}: row {} has {} columns, expected {}",
                path.display(),
                lineno + 1,
                row.len(),
                expect_cols
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_feature_csv(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Read the raw binary feature format.
pub fn read_feature_bin(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    if &magic != FEATURE_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic, not a feature file",
            path.display()
        )));
    }
    let mut dim = [0u8; 8];
    file.read_exact(&mut dim)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let rows = u64::from_le_bytes(dim) as usize;
    file.read_exact(&mut dim)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let cols = u64::from_le_bytes(dim) as usize;
    let mut payload = Vec::new();
    file.read_to_end(&mut payload)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    if payload.len() != rows * cols * 8 {
        return Err(Error::Format(format!(
            "{}: payload holds {} bytes, expected {} for {}x{}",
            path.display(),
            payload.len(),
            rows * cols * 8,
            rows,
            cols
        )));
    }
    let mut data = Vec::with_capacity(rows);
    for r in 0..rows {
        let mut row = Vec::with_capacity(cols);
        for c in 0..cols {
            let off = (r * cols + c) * 8;
            let v = f64::from_le_bytes(payload[off..off + 8].try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::Format(format!(
                    "{}: row {} col {}: non-finite feature value",
                    path.display(),
                    r + 1,
                    c + 1
                )));
            }
            row.push(v);
        }
        data.push(row);
    }
    Ok(data)
}

pub fn write_feature_bin(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut write = |bytes: &[u8]| -> Result<()> {
        file.write_all(bytes)
            .map_err(|e| Error::io(path.display().to_string(), e))
    };
    write(FEATURE_MAGIC)?;
    write(&(r as u64).to_le_bytes())?;
    write(&(c as u64).to_le_bytes())?;
    for row in rows {
        for v in row {
            write(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Parse a headerless CSV of strict {0,1} labels.
pub fn read_label_csv(path: &Path, expect_cols: usize) -> Result<Vec<Vec<bool>>> {
    let text = read_to_string(path)?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(expect_cols);
        for (col, field) in line.split(',').enumerate() {
            match field.trim() {
                "0" => row.push(false),
                "1" => row.push(true),
                other => {
                    return Err(Error::Format(format!(
                        "{}: row {} col {}: label must be 0 or 1, got {:?}",
                        path.display(),
                        lineno + 1,
                        col + 1,
                        other
                    )))
                }
            }
        }
        if row.len() != expect_cols {
            return Err(Error::Format(format!(
                "{}: row {} has {} columns, expected {}",
                path.display(),
                lineno + 1,
                row.len(),
                expect_cols
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_label_csv(path: &Path, rows: &[Vec<bool>]) -> Result<()> {
    let mut out = String::new();
    for row in rows {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn read_scene_csv(path: &Path) -> Result<Vec<usize>> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v: usize = line.trim().parse().map_err(|_| {
            Error::Format(format!(
                "{}: row {}: scene id must be a nonnegative integer",
                path.display(),
                lineno + 1
            ))
        })?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_scene_csv(path: &Path, scenes: &[usize]) -> Result<()> {
    let mut out = String::new();
    for s in scenes {
        out.push_str(&format!("{s}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Summary statistics produced while loading, for the command-line report.
#[derive(Debug, Clone, Serialize)]
pub struct IngestReport {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub label_frequencies: Vec<f64>,
    pub constant_labels: Vec<String>,
}

/// Load a dataset from its manifest, validating every declared shape.
pub fn ingest(manifest_path: &Path) -> Result<(LabeledDataset, IngestReport)> {
    let text = read_to_string(manifest_path)?;
    let manifest: DatasetManifest = serde_json::from_str(&text)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    load_dataset(&manifest, base)
}

/// Load a dataset from an already-parsed manifest with paths relative to
/// `base`.
pub fn load_dataset(manifest: &DatasetManifest, base: &Path) -> Result<(LabeledDataset, IngestReport)> {
    if manifest.label_names.len() != manifest.l {
        return Err(Error::Format(format!(
            "manifest declares l={} but lists {} label names",
            manifest.l,
            manifest.label_names.len()
        )));
    }
    let feature_path = base.join(&manifest.features);
    let features = match feature_path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_feature_csv(&feature_path, manifest.d)?,
        Some("bin") => read_feature_bin(&feature_path)?,
        other => {
            return Err(Error::Format(format!(
                "feature file extension {:?} not supported (use .csv or .bin)",
                other.unwrap_or("")
            )))
        }
    };
    if features.len() != manifest.n {
        return Err(Error::Format(format!(
            "feature file has {} rows, manifest declares n={}",
            features.len(),
            manifest.n
        )));
    }
    if let Some(row) = features.iter().find(|r| r.len() != manifest.d) {
        return Err(Error::Format(format!(
            "feature row has {} columns, manifest declares d={}",
            row.len(),
            manifest.d
        )));
    }
    let labels = read_label_csv(&base.join(&manifest.labels), manifest.l)?;
    if labels.len() != manifest.n {
        return Err(Error::Format(format!(
            "label file has {} rows, manifest declares n={}",
            labels.len(),
            manifest.n
        )));
    }
    let scenes = match &manifest.scenes {
        Some(p) => {
            let s = read_scene_csv(&base.join(p))?;
            if s.len() != manifest.n {
                return Err(Error::Format(format!(
                    "scene file has {} rows, manifest declares n={}",
                    s.len(),
                    manifest.n
                )));
            }
            Some(s)
        }
        None => None,
    };
    for indices in [&manifest.train_indices, &manifest.val_indices].into_iter().flatten() {
        if let Some(&bad) = indices.iter().find(|&&i| i >= manifest.n) {
            return Err(Error::Format(format!(
                "split index {bad} out of range for n={}",
                manifest.n
            )));
        }
    }
    let dataset = LabeledDataset {
        features,
        labels,
        label_names: manifest.label_names.clone(),
        scenes,
        train_indices: manifest.train_indices.clone(),
        val_indices: manifest.val_indices.clone(),
    };
    let report = IngestReport {
        n: dataset.n(),
        d: dataset.dims(),
        l: dataset.label_count(),
        label_frequencies: dataset.label_frequencies(),
        constant_labels: dataset
            .constant_labels()
            .into_iter()
            .map(|k| dataset.label_names[k].clone())
            .collect(),
    };
    Ok((dataset, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn write_manifest(dir: &Path, manifest: &DatasetManifest) -> PathBuf {
        let path = dir.join("dataset.json");
        std::fs::write(&path, serde_json::to_string_pretty(manifest).unwrap()).unwrap();
        path
    }

    fn toy_manifest(n: usize) -> DatasetManifest {
        DatasetManifest {
            n,
            d: 2,
            l: 2,
            features: "f.csv".into(),
            labels: "y.csv".into(),
            label_names: vec!["a".into(), "b".into()],
            scenes: None,
            train_indices: None,
            val_indices: None,
        }
    }

    #[test]
    fn ingest_loads_matching_shapes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("f.csv"), "0.5,1\n-2,3.25\n0,0\n").unwrap();
        std::fs::write(dir.path().join("y.csv"), "0,1\n1,1\n1,0\n").unwrap();
        let path = write_manifest(dir.path(), &toy_manifest(3));
        let (ds, report) = ingest(&path).unwrap();
        assert_eq!(ds.n(), 3);
        assert_eq!(ds.features[1], vec![-2.0, 3.25]);
        assert_eq!(report.label_frequencies, vec![2.0 / 3.0, 2.0 / 3.0]);
        assert!(report.constant_labels.is_empty());
    }

    #[test]
    fn ingest_rejects_bad_label_value() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("f.csv"), "0,0\n1,1\n").unwrap();
        std::fs::write(dir.path().join("y.csv"), "0,1\n1,2\n").unwrap();
        let path = write_manifest(dir.path(), &toy_manifest(2));
        let err = ingest(&path).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
        assert!(err.contains("col 2"), "{err}");
    }

    #[test]
    fn ingest_rejects_row_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("f.csv"), "0,0\n1,1\n").unwrap();
        std::fs::write(dir.path().join("y.csv"), "0,1\n1,0\n").unwrap();
        let mut manifest = toy_manifest(3);
        manifest.n = 3;
        let path = write_manifest(dir.path(), &manifest);
        assert!(ingest(&path).is_err());
    }

    #[test]
    fn ingest_rejects_non_finite_feature() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("f.csv"), "0,nan\n1,1\n").unwrap();
        std::fs::write(dir.path().join("y.csv"), "0,1\n1,0\n").unwrap();
        let path = write_manifest(dir.path(), &toy_manifest(2));
        assert!(ingest(&path).is_err());
    }

    #[test]
    fn constant_label_reported() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("f.csv"), "0,0\n1,1\n").unwrap();
        std::fs::write(dir.path().join("y.csv"), "1,1\n1,0\n").unwrap();
        let path = write_manifest(dir.path(), &toy_manifest(2));
        let (_, report) = ingest(&path).unwrap();
        assert_eq!(report.constant_labels, vec!["a".to_string()]);
    }

    proptest! {
        #[test]
        fn binary_feature_round_trip(
            rows in proptest::collection::vec(
                proptest::collection::vec(-1e6f64..1e6, 3),
                0..8,
            )
        ) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("f.bin");
            write_feature_bin(&path, &rows).unwrap();
            let back = read_feature_bin(&path).unwrap();
            prop_assert_eq!(rows, back);
        }
    }
}
