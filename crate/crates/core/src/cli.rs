//! Command-line front end. Exit codes: 0 success, 2 usage or validation
//! error, 1 runtime failure. `CDL_WORKERS` sets the worker-thread count.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::experiments::{run_experiment, write_experiment, ExperimentConfig};
use crate::io::{load_dataset, save_dataset, ModelArtifact, DATA_FILE};
use crate::metrics::{auroc, top_m_detection};
use crate::penalties::ConcavePenalty;
use crate::robust::{fit, fit_from, outlier_scores, FitSettings, InitStrategy};
use crate::synth::{gen_dictionary_data, gen_two_gaussians, DictDataParams, TwoGaussianParams};

pub const WORKERS_ENV: &str = "CDL_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "concave-dl",
    version,
    about = "Robust dictionary learning with concave losses"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled dataset.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Fit a model to a dataset.
    Fit(FitArgs),
    /// Score a model against dataset labels.
    Eval(EvalArgs),
    /// Run a benchmark preset (fig1, fig2a, fig2b, fig2c).
    Experiment(ExperimentArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenKind {
    /// Two 2D Gaussian clusters with outliers on a ring.
    TwoGaussians {
        #[arg(long, default_value_t = 250)]
        per_cluster: usize,
        #[arg(long, default_value_t = 50)]
        outliers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.25)]
        spread: f64,
        #[arg(long, default_value_t = 6.0)]
        radius: f64,
        #[arg(short, long, default_value = "data")]
        out: PathBuf,
    },
    /// Sparse combinations of a random dictionary with planted outliers.
    Dict {
        #[arg(long, default_value_t = 32)]
        d: usize,
        #[arg(long, default_value_t = 64)]
        atoms: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        nnz: usize,
        #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
        outlier_ratio: f64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 3.0)]
        gain: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long, default_value = "data")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Random,
    Undercomplete,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Dataset directory (or a data CSV file).
    #[arg(long)]
    pub data: PathBuf,
    /// Penalty descriptor, e.g. `log:eps=1.0`, `identity`, `lq:q=0.5`.
    #[arg(long, default_value = "log:eps=1.0")]
    pub penalty: String,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Outer (weight-refresh) iterations.
    #[arg(long = "M", default_value_t = 10)]
    pub outer_iters: usize,
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    pub init: InitArg,
    #[arg(long)]
    pub batch_atoms: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub inner_max: Option<usize>,
    #[arg(long)]
    pub inner_tol: Option<f64>,
    /// Continue from a saved model; its settings are reused except M.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Model output directory.
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset directory containing labels.
    #[arg(long)]
    pub data: PathBuf,
    /// Top-m cut; defaults to the number of true outliers.
    #[arg(long)]
    pub m: Option<usize>,
    /// Metrics CSV; a row is appended if it exists.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    pub preset: String,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// Comma-separated sweep values replacing the preset grid.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value = "log:eps=1.0")]
    pub penalty: String,
    #[arg(long = "M", default_value_t = 10)]
    pub outer_iters: usize,
    #[arg(long)]
    pub batch_atoms: Option<usize>,
    #[arg(short, long, default_value = "results")]
    pub out: PathBuf,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

/// Configures the global worker pool from `CDL_WORKERS`, if set.
pub fn init_workers() -> Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")))?;
        // ignore a pool that is already set up
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    init_workers()?;
    match cli.command {
        Command::Gen { kind } => cmd_gen(kind),
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Experiment(a) => cmd_experiment(a),
    }
}

fn cmd_gen(kind: GenKind) -> Result<()> {
    let (ds, out) = match kind {
        GenKind::TwoGaussians {
            per_cluster,
            outliers,
            seed,
            spread,
            radius,
            out,
        } => {
            let p = TwoGaussianParams {
                n_per_cluster: per_cluster,
                n_outliers: outliers,
                seed,
                spread,
                outlier_radius: radius,
                ..Default::default()
            };
            (gen_two_gaussians(&p)?, out)
        }
        GenKind::Dict {
            d,
            atoms,
            n,
            nnz,
            outlier_ratio,
            noise,
            gain,
            seed,
            out,
        } => {
            let p = DictDataParams {
                dim: d,
                k_true: atoms,
                n,
                nnz,
                outlier_ratio,
                noise_sigma: noise,
                outlier_gain: gain,
                seed,
            };
            (gen_dictionary_data(&p)?, out)
        }
    };
    save_dataset(&out, &ds)?;
    println!(
        "wrote {} samples ({} outliers, d = {}) to {}",
        ds.n_samples(),
        ds.n_outliers(),
        ds.dim(),
        out.display()
    );
    Ok(())
}

fn data_dir(p: &Path) -> PathBuf {
    if p.is_file() {
        p.parent().map(Path::to_path_buf).unwrap_or_default()
    } else {
        p.to_path_buf()
    }
}

fn load_x(p: &Path) -> Result<ndarray::Array2<f64>> {
    if p.is_file() {
        crate::io::read_data_csv(p)
    } else {
        crate::io::read_data_csv(&p.join(DATA_FILE))
    }
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let penalty: ConcavePenalty = a.penalty.parse()?;
    let resumed = match &a.resume {
        Some(dir) => Some(ModelArtifact::load(dir)?),
        None => None,
    };
    let mut settings = match &resumed {
        Some(m) => m.settings.clone(),
        None => {
            let k = a.k.ok_or_else(|| Error::Domain("--k is required".into()))?;
            let init = match a.init {
                InitArg::Random => InitStrategy::Random,
                InitArg::Undercomplete => InitStrategy::Undercomplete {
                    batch_atoms: a.batch_atoms,
                },
            };
            FitSettings::new(k, a.lambda, penalty).with_seed(a.seed).with_init(init)
        }
    };
    settings.outer_iters = a.outer_iters;
    if let Some(v) = a.inner_max {
        settings.inner_max = v;
    }
    if let Some(v) = a.inner_tol {
        settings.inner_tol = v;
    }
    settings.validate()?;
    let x = load_x(&a.data)?;
    if let InitStrategy::Undercomplete { batch_atoms: Some(b) } = settings.init {
        if settings.n_atoms > x.nrows() && b >= x.nrows() {
            return Err(Error::Precondition(format!(
                "batch size must satisfy 1 <= b < d, got b = {b}, d = {}",
                x.nrows()
            )));
        }
    }

    let start = Instant::now();
    let (result, mut history) = match resumed {
        Some(m) => {
            let r = fit_from(x.view(), &settings, m.start_state())?;
            let mut h = m.history.clone();
            h.extend(r.history.iter().cloned());
            (r, h)
        }
        None => {
            let r = fit(x.view(), &settings)?;
            let h = r.history.clone();
            (r, h)
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    let mut model = ModelArtifact::from_fit(&result, &settings, seconds);
    std::mem::swap(&mut model.history, &mut history);
    model.save(&a.out)?;
    println!(
        "final robust objective {:.10e} after {} outer iterations ({} inner alternations); model written to {}",
        result.final_objective(),
        model.history.len(),
        result.history.iter().map(|h| h.inner_iterations).sum::<usize>(),
        a.out.display()
    );
    Ok(())
}

const EVAL_HEADER: [&str; 12] = [
    "seed",
    "penalty",
    "k",
    "lambda",
    "outer_iters",
    "init",
    "n",
    "auroc",
    "m",
    "top_m",
    "final_objective",
    "seconds",
];

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let model = ModelArtifact::load(&a.model)?;
    let dir = data_dir(&a.data);
    let (x, labels, _) = load_dataset(&dir)?;
    let labels = labels.ok_or_else(|| {
        Error::Domain(format!(
            "no labels file found in {}; eval needs outlier labels",
            dir.display()
        ))
    })?;
    if x.ncols() != model.weights.len() || x.nrows() != model.dictionary.dim() {
        return Err(Error::Shape(format!(
            "model was fit to {} samples of dimension {}, dataset has {} of dimension {}",
            model.weights.len(),
            model.dictionary.dim(),
            x.ncols(),
            x.nrows()
        )));
    }
    let scores = outlier_scores(&model.weights, model.settings.s_min);
    let m = a.m.unwrap_or_else(|| labels.iter().filter(|&&l| l).count());
    let au = auroc(&scores, &labels)?;
    let top = top_m_detection(&scores, &labels, m)?;
    let s = &model.settings;
    let init = match s.init {
        InitStrategy::Random => "random".to_string(),
        InitStrategy::Undercomplete { .. } => "undercomplete".to_string(),
    };
    let row = [
        s.seed.to_string(),
        s.penalty.to_string(),
        s.n_atoms.to_string(),
        s.lambda.to_string(),
        model.history.len().to_string(),
        init,
        x.ncols().to_string(),
        au.to_string(),
        m.to_string(),
        top.to_string(),
        model.final_objective().map(|v| v.to_string()).unwrap_or_default(),
        model.fit_seconds.to_string(),
    ];
    match &a.out {
        Some(path) => {
            let exists = path.exists() && std::fs::metadata(path)?.len() > 0;
            let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
            let mut w = csv::Writer::from_writer(file);
            if !exists {
                w.write_record(EVAL_HEADER)?;
            }
            w.write_record(&row)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = csv::Writer::from_writer(stdout.lock());
            w.write_record(EVAL_HEADER)?;
            w.write_record(&row)?;
            w.flush()?;
        }
    }
    eprintln!("auroc {au:.4}, {top} of top {m} are outliers");
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::new(&a.preset);
    cfg.seeds = (0..a.seeds).collect();
    cfg.values = a.values;
    cfg.lambda = a.lambda;
    cfg.penalty = a.penalty.parse()?;
    cfg.outer_iters = a.outer_iters;
    cfg.batch_atoms = a.batch_atoms;
    cfg.validate()?;
    let out = run_experiment(&cfg)?;
    write_experiment(&a.out, &out)?;
    let mut stdout = std::io::stdout().lock();
    for r in &out.summary {
        writeln!(
            stdout,
            "{}={} {:>13}: auroc {:.4} +- {:.4} ({} seeds)",
            r.sweep_var, r.value, r.init, r.auroc_mean, r.auroc_std, r.seeds
        )?;
    }
    writeln!(stdout, "results written to {}", a.out.display())?;
    Ok(())
}
