//! On-disk formats for datasets and fitted models.
//!
//! Matrices are CSV with a header row, floats written in shortest round-trip
//! form, so save -> load -> save reproduces files byte for byte. Metadata is JSON.
//!
//! Dataset directory: `data.csv` (one sample per row, header `f0..f{d-1}`),
//! `labels.csv` (`index,is_outlier`) and `meta.json`.
//!
//! Model directory: `dictionary.csv` (atoms as columns, header `a0..a{k-1}`),
//! `weights.csv` (`index,weight`), `coeffs.csv` (one sample per row, header
//! `c0..c{k-1}`) and `model.json`.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::dict_update::{Dictionary, UNIT_NORM_TOL};
use crate::error::{shape_err, Error, Result};
use crate::robust::{FitResult, FitSettings, OuterRecord, SampleWeights, StartState};
use crate::synth::LabeledDataset;
use crate::CoeffMatrix;

pub const DATA_FILE: &str = "data.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const DATASET_META_FILE: &str = "meta.json";
pub const DICTIONARY_FILE: &str = "dictionary.csv";
pub const WEIGHTS_FILE: &str = "weights.csv";
pub const COEFFS_FILE: &str = "coeffs.csv";
pub const MODEL_META_FILE: &str = "model.json";

const MODEL_FORMAT: u32 = 1;

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(s: &str, what: &str, row: usize, col: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| {
        Error::Domain(format!(
            "{what}: cannot parse `{s}` as a number (row {row}, column {col})"
        ))
    })
}

/// Writes `rows x cols` values row by row under `header`.
fn write_table(path: &Path, header: &[String], rows: usize, cell: impl Fn(usize, usize) -> f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    let mut rec = Vec::with_capacity(header.len());
    for r in 0..rows {
        rec.clear();
        rec.extend((0..header.len()).map(|c| fmt(cell(r, c))));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV with a header row into a `rows x cols` matrix.
fn read_table(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let what = path.display().to_string();
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let cols = header.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != cols {
            return Err(shape_err(format!(
                "{what}: row {} has {} fields, header has {cols}",
                i + 1,
                rec.len()
            )));
        }
        for (j, field) in rec.iter().enumerate() {
            values.push(parse_f64(field, &what, i + 1, j)?);
        }
        rows += 1;
    }
    let m = Array2::from_shape_vec((rows, cols), values).map_err(|e| shape_err(e.to_string()))?;
    Ok((header, m))
}

fn feature_header(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes samples (columns of `x`) as rows under the header `f0..f{d-1}`.
pub fn write_data_csv(path: &Path, x: &Array2<f64>) -> Result<()> {
    write_table(path, &feature_header("f", x.nrows()), x.ncols(), |r, c| x[[c, r]])
}

/// Reads a data CSV into a `d x n` matrix. Non-finite entries are an integrity error.
pub fn read_data_csv(path: &Path) -> Result<Array2<f64>> {
    let (_, rows) = read_table(path)?;
    if let Some(pos) = rows.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos / rows.ncols(), pos % rows.ncols());
        return Err(Error::Integrity(format!(
            "{}: non-finite value in sample {r}, feature {c}",
            path.display()
        )));
    }
    Ok(rows.reversed_axes().as_standard_layout().into_owned())
}

pub fn write_labels_csv(path: &Path, labels: &[bool]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "is_outlier"])?;
    for (i, &l) in labels.iter().enumerate() {
        w.write_record([i.to_string(), u8::from(l).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `index,is_outlier`; accepts `0/1` and `true/false`. Rows must be in index order.
pub fn read_labels_csv(path: &Path) -> Result<Vec<bool>> {
    let what = path.display().to_string();
    let mut r = csv::Reader::from_path(path)?;
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(shape_err(format!("{what}: row {} must have 2 fields", i + 1)));
        }
        if rec[0].trim().parse::<usize>().ok() != Some(i) {
            return Err(Error::Domain(format!(
                "{what}: row {} has index `{}`, expected {i}",
                i + 1,
                &rec[0]
            )));
        }
        labels.push(match rec[1].trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => return Err(Error::Domain(format!("{what}: bad label `{other}` in row {}", i + 1))),
        });
    }
    Ok(labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub generator: String,
    pub params: serde_json::Value,
    pub dim: usize,
    pub n_samples: usize,
    pub n_outliers: usize,
}

pub fn save_dataset(dir: &Path, ds: &LabeledDataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_data_csv(&dir.join(DATA_FILE), &ds.x)?;
    write_labels_csv(&dir.join(LABELS_FILE), &ds.is_outlier)?;
    let meta = DatasetMeta {
        generator: ds.generator.clone(),
        params: ds.params.clone(),
        dim: ds.dim(),
        n_samples: ds.n_samples(),
        n_outliers: ds.n_outliers(),
    };
    write_json(&dir.join(DATASET_META_FILE), &meta)
}

/// Data matrix (`d x n`) with labels and metadata when present.
pub type LoadedDataset = (Array2<f64>, Option<Vec<bool>>, Option<DatasetMeta>);

/// Loads a dataset directory. Labels and metadata are optional.
pub fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    let x = read_data_csv(&dir.join(DATA_FILE))?;
    let labels_path = dir.join(LABELS_FILE);
    let labels = if labels_path.exists() {
        let l = read_labels_csv(&labels_path)?;
        if l.len() != x.ncols() {
            return Err(shape_err(format!("{} labels for {} samples", l.len(), x.ncols())));
        }
        Some(l)
    } else {
        None
    };
    let meta_path = dir.join(DATASET_META_FILE);
    let meta = if meta_path.exists() {
        Some(read_json(&meta_path)?)
    } else {
        None
    };
    Ok((x, labels, meta))
}

/// A fitted model: everything needed to evaluate it or continue fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub dictionary: Dictionary,
    pub weights: SampleWeights,
    pub coeffs: CoeffMatrix,
    pub settings: FitSettings,
    pub history: Vec<OuterRecord>,
    /// Wall-clock seconds spent fitting.
    pub fit_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ModelMeta {
    format: u32,
    dim: usize,
    n_atoms: usize,
    n_samples: usize,
    penalty: String,
    lambda: f64,
    final_objective: Option<f64>,
    fit_seconds: f64,
    settings: FitSettings,
    history: Vec<OuterRecord>,
}

impl ModelArtifact {
    pub fn from_fit(result: &FitResult, settings: &FitSettings, fit_seconds: f64) -> Self {
        ModelArtifact {
            dictionary: result.dictionary.clone(),
            weights: result.weights.clone(),
            coeffs: result.coeffs.clone(),
            settings: settings.clone(),
            history: result.history.clone(),
            fit_seconds,
        }
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.history.last().map(|h| h.robust_objective)
    }

    /// Start state that continues this fit.
    pub fn start_state(&self) -> StartState {
        StartState {
            dictionary: self.dictionary.clone(),
            weights: self.weights.clone(),
            coeffs: Some(self.coeffs.clone()),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let d = self.dictionary.atoms();
        let (dim, k) = d.dim();
        let n = self.weights.len();
        write_table(&dir.join(DICTIONARY_FILE), &feature_header("a", k), dim, |r, c| {
            d[[r, c]]
        })?;
        let s = self.weights.as_slice();
        let mut w = csv::Writer::from_path(dir.join(WEIGHTS_FILE))?;
        w.write_record(["index", "weight"])?;
        for (i, v) in s.iter().enumerate() {
            w.write_record([i.to_string(), fmt(*v)])?;
        }
        w.flush()?;
        let a = &self.coeffs;
        write_table(&dir.join(COEFFS_FILE), &feature_header("c", k), n, |r, c| a[[c, r]])?;
        let meta = ModelMeta {
            format: MODEL_FORMAT,
            dim,
            n_atoms: k,
            n_samples: n,
            penalty: self.settings.penalty.to_string(),
            lambda: self.settings.lambda,
            final_objective: self.final_objective(),
            fit_seconds: self.fit_seconds,
            settings: self.settings.clone(),
            history: self.history.clone(),
        };
        write_json(&dir.join(MODEL_META_FILE), &meta)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: ModelMeta = read_json(&dir.join(MODEL_META_FILE))?;
        if meta.format != MODEL_FORMAT {
            return Err(Error::Integrity(format!("unsupported model format {}", meta.format)));
        }
        let (_, atoms) = read_table(&dir.join(DICTIONARY_FILE))?;
        if atoms.dim() != (meta.dim, meta.n_atoms) {
            return Err(Error::Integrity(format!(
                "dictionary file is {:?}, metadata says {:?}",
                atoms.dim(),
                (meta.dim, meta.n_atoms)
            )));
        }
        let dictionary = Dictionary::from_atoms(atoms)?;
        dictionary.check(UNIT_NORM_TOL)?;

        let (_, w) = read_table(&dir.join(WEIGHTS_FILE))?;
        if w.dim() != (meta.n_samples, 2) {
            return Err(Error::Integrity(format!(
                "weights file is {:?}, expected {} rows",
                w.dim(),
                meta.n_samples
            )));
        }
        let weights = SampleWeights::new(w.column(1).to_vec())?;

        let (_, a) = read_table(&dir.join(COEFFS_FILE))?;
        if a.dim() != (meta.n_samples, meta.n_atoms) {
            return Err(Error::Integrity(format!(
                "coefficient file is {:?}, expected {:?}",
                a.dim(),
                (meta.n_samples, meta.n_atoms)
            )));
        }
        let coeffs = a.reversed_axes().as_standard_layout().into_owned();
        if meta.settings.penalty.to_string() != meta.penalty || meta.settings.lambda.to_bits() != meta.lambda.to_bits()
        {
            return Err(Error::Integrity(
                "model metadata is inconsistent with its settings".into(),
            ));
        }
        Ok(ModelArtifact {
            dictionary,
            weights,
            coeffs,
            settings: meta.settings,
            history: meta.history,
            fit_seconds: meta.fit_seconds,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalties::ConcavePenalty;
    use crate::robust::fit;
    use crate::synth::{gen_two_gaussians, TwoGaussianParams};

    #[test]
    fn dataset_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = gen_two_gaussians(&TwoGaussianParams {
            n_per_cluster: 10,
            n_outliers: 3,
            seed: 4,
            ..Default::default()
        })
        .unwrap();
        save_dataset(dir.path(), &ds).unwrap();
        let (x, labels, meta) = load_dataset(dir.path()).unwrap();
        assert_eq!(x, ds.x);
        assert_eq!(labels.unwrap(), ds.is_outlier);
        let meta = meta.unwrap();
        assert_eq!((meta.dim, meta.n_samples, meta.n_outliers), (2, 23, 3));
    }

    #[test]
    fn non_finite_data_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "f0,f1\n1.0,2.0\nNaN,1.0\n").unwrap();
        let err = read_data_csv(&p).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");
        fs::write(&p, "f0,f1\n1.0,x\n").unwrap();
        assert!(matches!(read_data_csv(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn model_save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let ds = gen_two_gaussians(&TwoGaussianParams {
            n_per_cluster: 20,
            n_outliers: 4,
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let settings = FitSettings::new(2, 0.3, ConcavePenalty::log(1.0).unwrap()).with_outer_iters(2);
        let result = fit(ds.x.view(), &settings).unwrap();
        let m = ModelArtifact::from_fit(&result, &settings, 0.125);
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        m.save(&a).unwrap();
        let loaded = ModelArtifact::load(&a).unwrap();
        assert_eq!(loaded, m);
        loaded.save(&b).unwrap();
        for f in [DICTIONARY_FILE, WEIGHTS_FILE, COEFFS_FILE, MODEL_META_FILE] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
        }
    }
}
