//! Majorization-minimization driver for robust dictionary learning.
//!
//! The robust objective is `1/2 sum_i F(||x_i - D a_i||^2) + lambda sum_i ||a_i||_1`
//! with `F = g o sqrt` concave. Each outer iteration replaces `F` by its tangent
//! line at the current residuals, which turns the problem into a weighted
//! dictionary learning problem with per-sample weights `s_i = F'(v_i)`. That
//! problem is solved by alternating a dictionary update and per-sample Lasso
//! with regularization `lambda / s_i`, after which the weights are refreshed.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dict_update::{update_dictionary, Dictionary};
use crate::error::{shape_err, Error, Result};
use crate::init::undercomplete_init;
use crate::penalties::{ConcavePenalty, DEFAULT_R_FLOOR, DEFAULT_W_MAX};
use crate::sparse_coding::{sparse_code_all, LassoSettings, DEFAULT_S_MIN};
use crate::CoeffMatrix;

/// Atom norms beyond this deviation make objective evaluation fail.
const OBJECTIVE_NORM_TOL: f64 = 1e-8;

/// Nonnegative per-sample weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SampleWeights(Vec<f64>);

impl SampleWeights {
    pub fn new(s: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = s.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::Domain(format!(
                "weight {i} is {v}; weights must be finite and >= 0"
            )));
        }
        Ok(SampleWeights(s))
    }

    pub fn ones(n: usize) -> Self {
        SampleWeights(vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for SampleWeights {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        SampleWeights::new(v)
    }
}

impl From<SampleWeights> for Vec<f64> {
    fn from(s: SampleWeights) -> Vec<f64> {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitStrategy {
    /// Gaussian random atoms and unit weights.
    Random,
    /// Learn the dictionary in undercomplete batches of `batch_atoms` atoms and
    /// average their weights. Only used when `k > d`; otherwise falls back to
    /// `Random` with the same random stream. `None` picks `floor(d/2)`.
    Undercomplete { batch_atoms: Option<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoeffInit {
    Zero,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub n_atoms: usize,
    pub lambda: f64,
    pub penalty: ConcavePenalty,
    /// Number of weight refreshes (outer MM iterations).
    pub outer_iters: usize,
    /// Cap on dictionary/coding alternations per outer iteration.
    pub inner_max: usize,
    /// Relative change of the weighted objective that ends the inner loop.
    pub inner_tol: f64,
    pub r_floor: f64,
    pub w_max: f64,
    pub s_min: f64,
    pub seed: u64,
    pub init: InitStrategy,
    pub coeff_init: CoeffInit,
    /// Block-coordinate sweeps per dictionary update.
    pub dict_sweeps: usize,
    pub lasso: LassoSettings,
    /// Start each sparse-coding pass from the previous coefficients.
    pub warm_start: bool,
    /// Keep the weights at their initial values (plain dictionary learning when they are 1).
    pub freeze_weights: bool,
}

impl FitSettings {
    pub fn new(n_atoms: usize, lambda: f64, penalty: ConcavePenalty) -> Self {
        FitSettings {
            n_atoms,
            lambda,
            penalty,
            outer_iters: 10,
            inner_max: 30,
            inner_tol: 1e-5,
            r_floor: DEFAULT_R_FLOOR,
            w_max: DEFAULT_W_MAX,
            s_min: DEFAULT_S_MIN,
            seed: 0,
            init: InitStrategy::Random,
            coeff_init: CoeffInit::Zero,
            dict_sweeps: 1,
            lasso: LassoSettings::default(),
            warm_start: true,
            freeze_weights: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_outer_iters(mut self, m: usize) -> Self {
        self.outer_iters = m;
        self
    }

    pub fn with_init(mut self, init: InitStrategy) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.n_atoms < 1 {
            return Err(Error::Domain("number of atoms must be >= 1".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Domain(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.outer_iters < 1 {
            return Err(Error::Domain("outer iterations must be >= 1".into()));
        }
        if self.inner_max < 1 {
            return Err(Error::Domain("inner_max must be >= 1".into()));
        }
        if self.dict_sweeps < 1 {
            return Err(Error::Domain("dict_sweeps must be >= 1".into()));
        }
        if !positive(self.inner_tol) || !positive(self.r_floor) || !positive(self.s_min) {
            return Err(Error::Domain("inner_tol, r_floor and s_min must be positive".into()));
        }
        if !(self.w_max > 0.0) {
            return Err(Error::Domain("w_max must be positive".into()));
        }
        if let InitStrategy::Undercomplete { batch_atoms: Some(0) } = self.init {
            return Err(Error::Domain("batch_atoms must be >= 1".into()));
        }
        self.penalty.validated()?;
        self.lasso.validate()
    }
}

/// What happened during one outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    /// Robust objective at the end of the inner loop.
    pub robust_objective: f64,
    /// Weighted objective at entry, before any update with the new weights.
    pub surrogate_start: f64,
    /// Weighted objective after each dictionary/coding alternation.
    pub inner_objectives: Vec<f64>,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    /// Sparse-coding columns that hit the sweep cap in the last alternation.
    pub lasso_nonconverged: usize,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub dictionary: Dictionary,
    pub coeffs: CoeffMatrix,
    /// Weights after the final refresh.
    pub weights: SampleWeights,
    pub history: Vec<OuterRecord>,
    /// Weights in force during each outer iteration.
    pub weight_history: Vec<SampleWeights>,
}

impl FitResult {
    pub fn final_objective(&self) -> f64 {
        self.history.last().map(|h| h.robust_objective).unwrap_or(f64::NAN)
    }

    pub fn converged(&self) -> bool {
        self.history.iter().all(|h| h.inner_converged)
    }
}

/// Where an MM run starts from.
#[derive(Debug, Clone)]
pub struct StartState {
    pub dictionary: Dictionary,
    pub weights: SampleWeights,
    pub coeffs: Option<CoeffMatrix>,
}

pub(crate) fn check_data(x: ArrayView2<f64>) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::Domain(format!(
            "data matrix is empty ({} x {})",
            x.nrows(),
            x.ncols()
        )));
    }
    if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
        let (r, c) = (pos / x.ncols(), pos % x.ncols());
        return Err(Error::Integrity(format!(
            "data contains a non-finite value at feature {r}, sample {c}"
        )));
    }
    Ok(())
}

/// Learns a dictionary and sample weights from the columns of `x`.
pub fn fit(x: ArrayView2<f64>, settings: &FitSettings) -> Result<FitResult> {
    settings.validate()?;
    check_data(x)?;
    let (dim, n) = x.dim();
    let k = settings.n_atoms;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);

    let (dictionary, weights) = match settings.init {
        InitStrategy::Undercomplete { batch_atoms } if k > dim => {
            let b = batch_atoms.unwrap_or_else(|| default_batch_atoms(dim));
            let init = undercomplete_init(x, k, b, settings)?;
            (init.dictionary, init.weights)
        }
        _ => (Dictionary::random(dim, k, &mut rng), SampleWeights::ones(n)),
    };
    let coeffs = match settings.coeff_init {
        CoeffInit::Zero => Array2::zeros((k, n)),
        CoeffInit::Random => Array2::from_shape_simple_fn((k, n), || StandardNormal.sample(&mut rng)),
    };
    fit_from(
        x,
        settings,
        StartState {
            dictionary,
            weights,
            coeffs: Some(coeffs),
        },
    )
}

/// Default atoms per undercomplete batch: `floor(d/2)`, at least 1, below `d`.
pub fn default_batch_atoms(dim: usize) -> usize {
    (dim / 2).max(1).min(dim.saturating_sub(1))
}

/// Runs the MM iterations from an explicit start.
pub fn fit_from(x: ArrayView2<f64>, settings: &FitSettings, start: StartState) -> Result<FitResult> {
    settings.validate()?;
    check_data(x)?;
    let (dim, n) = x.dim();
    let k = settings.n_atoms;
    let StartState {
        mut dictionary,
        mut weights,
        coeffs,
    } = start;
    if dictionary.dim() != dim || dictionary.n_atoms() != k {
        return Err(shape_err(format!(
            "start dictionary is {}x{}, expected {dim}x{k}",
            dictionary.dim(),
            dictionary.n_atoms()
        )));
    }
    if weights.len() != n {
        return Err(shape_err(format!("{} start weights for {n} samples", weights.len())));
    }
    let mut coeffs = coeffs.unwrap_or_else(|| Array2::zeros((k, n)));
    if coeffs.dim() != (k, n) {
        return Err(shape_err(format!(
            "start coefficients are {:?}, expected {:?}",
            coeffs.dim(),
            (k, n)
        )));
    }
    if n < k {
        log_warn(&format!("fewer samples ({n}) than atoms ({k})"));
    }

    let lambda = settings.lambda;
    let mut history = Vec::with_capacity(settings.outer_iters);
    let mut weight_history = Vec::with_capacity(settings.outer_iters);
    for _ in 0..settings.outer_iters {
        let surrogate_start = surrogate_objective(x, &dictionary, coeffs.view(), &weights, lambda)?;
        let mut inner_objectives = Vec::new();
        let mut prev: Option<f64> = None;
        let mut inner_converged = false;
        let mut lasso_nonconverged = 0;
        for _ in 0..settings.inner_max {
            // nothing to fit while every coefficient is zero
            if coeffs.iter().any(|&v| v != 0.0) {
                dictionary = update_dictionary(&dictionary, x, coeffs.view(), &weights, settings.dict_sweeps)?;
            }
            let warm = if settings.warm_start { Some(coeffs.view()) } else { None };
            let codes = sparse_code_all(&dictionary, x, lambda, &weights, settings.s_min, &settings.lasso, warm)?;
            coeffs = codes.coeffs;
            lasso_nonconverged = codes.nonconverged;
            let obj = surrogate_objective(x, &dictionary, coeffs.view(), &weights, lambda)?;
            inner_objectives.push(obj);
            if let Some(p) = prev {
                let scale = p.abs().max(f64::MIN_POSITIVE);
                if (p - obj).abs() <= settings.inner_tol * scale {
                    inner_converged = true;
                    break;
                }
            }
            prev = Some(obj);
        }
        let robust = robust_objective(x, &dictionary, coeffs.view(), lambda, &settings.penalty)?;
        history.push(OuterRecord {
            robust_objective: robust,
            surrogate_start,
            inner_iterations: inner_objectives.len(),
            inner_objectives,
            inner_converged,
            lasso_nonconverged,
        });
        weight_history.push(weights.clone());
        if !settings.freeze_weights {
            weights = refresh_weights(x, &dictionary, coeffs.view(), settings)?;
        }
    }
    Ok(FitResult {
        dictionary,
        coeffs,
        weights,
        history,
        weight_history,
    })
}

fn log_warn(msg: &str) {
    eprintln!("warning: {msg}");
}

/// `||x_i - D a_i||_2` for every sample.
pub fn residual_norms(x: ArrayView2<f64>, dict: &Dictionary, a: ArrayView2<f64>) -> Result<Array1<f64>> {
    if x.nrows() != dict.dim() || a.nrows() != dict.n_atoms() || a.ncols() != x.ncols() {
        return Err(shape_err(format!(
            "data {:?}, dictionary {}x{}, coefficients {:?}",
            x.dim(),
            dict.dim(),
            dict.n_atoms(),
            a.dim()
        )));
    }
    let r = &x - &dict.atoms().dot(&a);
    Ok(r.axis_iter(Axis(1)).map(|c| c.dot(&c).sqrt()).collect())
}

/// Reconstruction errors; the outlier score of plain dictionary learning.
pub fn reconstruction_errors(x: ArrayView2<f64>, dict: &Dictionary, a: ArrayView2<f64>) -> Result<Vec<f64>> {
    Ok(residual_norms(x, dict, a)?.to_vec())
}

/// New weights `s_i = g'(r_i) / (2 r_i)` from the current residual norms.
pub fn refresh_weights(
    x: ArrayView2<f64>,
    dict: &Dictionary,
    a: ArrayView2<f64>,
    settings: &FitSettings,
) -> Result<SampleWeights> {
    let r = residual_norms(x, dict, a)?;
    let s = r
        .iter()
        .map(|&ri| settings.penalty.weight(ri, settings.r_floor, settings.w_max))
        .collect::<Result<Vec<_>>>()?;
    SampleWeights::new(s)
}

fn l1_total(a: ArrayView2<f64>) -> f64 {
    a.axis_iter(Axis(1))
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .sum()
}

/// `1/2 sum_i F(||x_i - D a_i||^2) + lambda sum_i ||a_i||_1`.
///
/// Fails with an integrity error if any atom is not unit-norm within 1e-8.
pub fn robust_objective(
    x: ArrayView2<f64>,
    dict: &Dictionary,
    a: ArrayView2<f64>,
    lambda: f64,
    penalty: &ConcavePenalty,
) -> Result<f64> {
    dict.check(OBJECTIVE_NORM_TOL)?;
    let r = residual_norms(x, dict, a)?;
    let mut loss = 0.0;
    for ri in r.iter() {
        loss += penalty.loss(ri * ri)?;
    }
    Ok(0.5 * loss + lambda * l1_total(a))
}

/// Weighted objective `1/2 sum_i s_i ||x_i - D a_i||^2 + lambda sum_i ||a_i||_1`.
///
/// Multiplying sample `i`'s Lasso problem `1/2 ||x_i - D a||^2 + (lambda/s_i) ||a||_1`
/// by `s_i` gives its term here, so both describe the same minimizer.
pub fn surrogate_objective(
    x: ArrayView2<f64>,
    dict: &Dictionary,
    a: ArrayView2<f64>,
    s: &SampleWeights,
    lambda: f64,
) -> Result<f64> {
    if s.len() != x.ncols() {
        return Err(shape_err(format!("{} weights for {} samples", s.len(), x.ncols())));
    }
    let r = residual_norms(x, dict, a)?;
    let quad: f64 = r.iter().zip(s.as_slice()).map(|(ri, si)| si * ri * ri).sum();
    Ok(0.5 * quad + lambda * l1_total(a))
}

/// Outlier scores `1 / max(s_i, s_min)`; larger means more outlying.
pub fn outlier_scores(s: &SampleWeights, s_min: f64) -> Vec<f64> {
    s.as_slice().iter().map(|&v| 1.0 / v.max(s_min)).collect()
}
