//! Benchmark sweeps over synthetic data.
//!
//! `fig1` compares penalties on the 2D two-cluster data. The `fig2*` presets
//! sweep dictionary size, sample count and outlier ratio on dictionary data,
//! each cell run with both the default and the undercomplete initialization.
//! The data seed for repeat `r` is `r`, the fit seed is `r + FIT_SEED_OFFSET`
//! for both initializations, so the two only differ where the `k > d` gate
//! is met.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{auroc, top_m_detection};
use crate::penalties::ConcavePenalty;
use crate::robust::{fit, outlier_scores, reconstruction_errors, FitSettings, InitStrategy};
use crate::synth::{gen_dictionary_data, gen_two_gaussians, DictDataParams, TwoGaussianParams};

pub const PRESETS: [&str; 4] = ["fig1", "fig2a", "fig2b", "fig2c"];
pub const FIT_SEED_OFFSET: u64 = 1000;

/// Default lambda for the 2D preset.
pub const FIG1_LAMBDA: f64 = 0.4;
/// Default lambda for the dictionary-data presets.
pub const FIG2_LAMBDA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Default,
    Undercomplete,
}

impl InitKind {
    pub fn name(self) -> &'static str {
        match self {
            InitKind::Default => "default",
            InitKind::Undercomplete => "undercomplete",
        }
    }

    fn strategy(self, batch_atoms: Option<usize>) -> InitStrategy {
        match self {
            InitKind::Default => InitStrategy::Random,
            InitKind::Undercomplete => InitStrategy::Undercomplete { batch_atoms },
        }
    }
}

/// Fitting method compared in the 2D preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fig1Method {
    Log,
    Identity,
    /// Weights frozen at 1, scored by reconstruction error.
    Uniform,
}

impl Fig1Method {
    pub const ALL: [Fig1Method; 3] = [Fig1Method::Log, Fig1Method::Identity, Fig1Method::Uniform];

    pub fn name(self) -> &'static str {
        match self {
            Fig1Method::Log => "log",
            Fig1Method::Identity => "identity",
            Fig1Method::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: String,
    pub seeds: Vec<u64>,
    /// Sweep values; `None` uses the preset grid.
    pub values: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub penalty: ConcavePenalty,
    pub outer_iters: usize,
    pub batch_atoms: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(preset: &str) -> Self {
        ExperimentConfig {
            preset: preset.to_string(),
            seeds: (0..5).collect(),
            values: None,
            lambda: None,
            penalty: ConcavePenalty::Log { eps: 1.0 },
            outer_iters: 10,
            batch_atoms: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !PRESETS.contains(&self.preset.as_str()) {
            return Err(Error::Domain(format!(
                "unknown preset `{}`; available presets: {}",
                self.preset,
                PRESETS.join(", ")
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Domain("at least one seed is required".into()));
        }
        if self.outer_iters < 1 {
            return Err(Error::Domain("outer iterations must be >= 1".into()));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::Domain(format!("lambda must be finite and >= 0, got {l}")));
            }
        }
        self.penalty.validated()?;
        for v in self.grid() {
            self.check_value(v)?;
        }
        Ok(())
    }

    fn check_value(&self, v: f64) -> Result<()> {
        let ok = match self.preset.as_str() {
            "fig2a" | "fig2b" => v >= 1.0 && v.fract() == 0.0,
            "fig2c" => (0.0..1.0).contains(&v),
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "value {v} is not valid for preset {}",
                self.preset
            )))
        }
    }

    /// Sweep variable name and values.
    pub fn sweep_var(&self) -> &'static str {
        match self.preset.as_str() {
            "fig1" => "method",
            "fig2a" => "k",
            "fig2b" => "n",
            _ => "outlier_ratio",
        }
    }

    pub fn grid(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        match self.preset.as_str() {
            "fig2a" => vec![8.0, 16.0, 32.0, 40.0, 48.0, 64.0, 96.0, 128.0],
            "fig2b" => vec![250.0, 500.0, 1000.0, 2000.0, 4000.0],
            "fig2c" => vec![0.05, 0.10, 0.20, 0.30, 0.40],
            _ => vec![],
        }
    }
}

/// One (configuration, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub sweep_var: String,
    pub value: String,
    pub init: String,
    pub seed: u64,
    pub auroc: f64,
    pub m: usize,
    pub top_m: usize,
    pub final_objective: f64,
    /// Largest `| ||d_j|| - 1 |` of the fitted dictionary.
    pub norm_deviation: f64,
    pub seconds: f64,
}

/// Seed-averaged AUROC for one (value, init).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub sweep_var: String,
    pub value: String,
    pub init: String,
    pub auroc_mean: f64,
    pub auroc_std: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub cells: Vec<CellResult>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    pub fn summary_for(&self, value: &str, init: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.value == value && r.init == init)
    }
}

#[derive(Debug, Clone)]
enum Job {
    Fig1(Fig1Method),
    Dict {
        params: DictDataParams,
        k: usize,
        init: InitKind,
    },
}

struct Cell {
    value: String,
    init: String,
    seed: u64,
    job: Job,
}

/// Formats a sweep value the way it appears in the output tables.
pub fn value_label(preset: &str, v: f64) -> String {
    match preset {
        "fig2a" | "fig2b" => format!("{}", v as usize),
        _ => format!("{v}"),
    }
}

fn build_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells = Vec::new();
    if cfg.preset == "fig1" {
        for method in Fig1Method::ALL {
            for &seed in &cfg.seeds {
                cells.push(Cell {
                    value: method.name().into(),
                    init: InitKind::Default.name().into(),
                    seed,
                    job: Job::Fig1(method),
                });
            }
        }
        return cells;
    }
    for v in cfg.grid() {
        for init in [InitKind::Default, InitKind::Undercomplete] {
            for &seed in &cfg.seeds {
                let mut params = DictDataParams {
                    seed,
                    ..Default::default()
                };
                let mut k = 64;
                match cfg.preset.as_str() {
                    "fig2a" => k = v as usize,
                    "fig2b" => params.n = v as usize,
                    _ => params.outlier_ratio = v,
                }
                cells.push(Cell {
                    value: value_label(&cfg.preset, v),
                    init: init.name().into(),
                    seed,
                    job: Job::Dict { params, k, init },
                });
            }
        }
    }
    cells
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<CellResult> {
    let start = Instant::now();
    let fit_seed = cell.seed + FIT_SEED_OFFSET;
    let (scores, labels, m, objective, dev) = match &cell.job {
        Job::Fig1(method) => {
            let ds = gen_two_gaussians(&TwoGaussianParams {
                seed: cell.seed,
                ..Default::default()
            })?;
            let lambda = cfg.lambda.unwrap_or(FIG1_LAMBDA);
            let penalty = match method {
                Fig1Method::Log => cfg.penalty,
                _ => ConcavePenalty::Identity,
            };
            let mut s = FitSettings::new(2, lambda, penalty)
                .with_outer_iters(cfg.outer_iters)
                .with_seed(fit_seed);
            s.freeze_weights = *method == Fig1Method::Uniform;
            let r = fit(ds.x.view(), &s)?;
            let scores = if s.freeze_weights {
                reconstruction_errors(ds.x.view(), &r.dictionary, r.coeffs.view())?
            } else {
                outlier_scores(&r.weights, s.s_min)
            };
            let m = ds.n_outliers();
            (
                scores,
                ds.is_outlier,
                m,
                r.final_objective(),
                r.dictionary.max_norm_deviation(),
            )
        }
        Job::Dict { params, k, init } => {
            let ds = gen_dictionary_data(params)?;
            let lambda = cfg.lambda.unwrap_or(FIG2_LAMBDA);
            let s = FitSettings::new(*k, lambda, cfg.penalty)
                .with_outer_iters(cfg.outer_iters)
                .with_seed(fit_seed)
                .with_init(init.strategy(cfg.batch_atoms));
            let r = fit(ds.x.view(), &s)?;
            let m = ds.n_outliers();
            (
                outlier_scores(&r.weights, s.s_min),
                ds.is_outlier,
                m,
                r.final_objective(),
                r.dictionary.max_norm_deviation(),
            )
        }
    };
    Ok(CellResult {
        sweep_var: cfg.sweep_var().into(),
        value: cell.value.clone(),
        init: cell.init.clone(),
        seed: cell.seed,
        auroc: auroc(&scores, &labels)?,
        m,
        top_m: top_m_detection(&scores, &labels, m)?,
        final_objective: objective,
        norm_deviation: dev,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every cell of the preset (in parallel) and aggregates over seeds.
/// Cells and summary rows come out in grid order regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let cells = build_cells(cfg);
    let cells: Vec<CellResult> = cells.par_iter().map(|c| run_cell(cfg, c)).collect::<Result<_>>()?;

    let mut summary: Vec<SummaryRow> = Vec::new();
    for c in &cells {
        if summary.iter().any(|r| r.value == c.value && r.init == c.init) {
            continue;
        }
        let aurocs: Vec<f64> = cells
            .iter()
            .filter(|d| d.value == c.value && d.init == c.init)
            .map(|d| d.auroc)
            .collect();
        let (auroc_mean, auroc_std) = mean_std(&aurocs);
        summary.push(SummaryRow {
            sweep_var: c.sweep_var.clone(),
            value: c.value.clone(),
            init: c.init.clone(),
            auroc_mean,
            auroc_std,
            seeds: aurocs.len(),
        });
    }
    Ok(ExperimentOutput { cells, summary })
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `summary.csv` and `cells.csv` into `dir`.
pub fn write_experiment(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_rows(&dir.join("summary.csv"), &out.summary)?;
    write_rows(&dir.join("cells.csv"), &out.cells)
}
