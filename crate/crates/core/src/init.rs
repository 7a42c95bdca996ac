//! Undercomplete initialization of an overcomplete dictionary.
//!
//! The `k` atoms are learned in batches of `b < d` atoms, each batch being a
//! single-outer-iteration run of the MM driver on the full data matrix. An
//! undercomplete dictionary cannot reconstruct samples that leave the subspace
//! of the bulk of the data, so outliers come out of every batch with small
//! weights. The averaged weights seed the main run.

use ndarray::{s, Array2, ArrayView2};
use rayon::prelude::*;

use crate::dict_update::Dictionary;
use crate::error::{Error, Result};
use crate::robust::{fit, CoeffInit, FitResult, FitSettings, InitStrategy, SampleWeights};

#[derive(Debug, Clone)]
pub struct UndercompleteInit {
    pub dictionary: Dictionary,
    /// Mean of the batch weight vectors.
    pub weights: SampleWeights,
    /// Weights produced by each batch, in batch order.
    pub batch_weights: Vec<SampleWeights>,
    /// Atom index ranges written by each batch.
    pub batches: Vec<std::ops::Range<usize>>,
}

/// Atom ranges for `k` atoms in batches of `b`; the last batch takes the remainder.
pub fn batch_ranges(k: usize, b: usize) -> Vec<std::ops::Range<usize>> {
    assert!(b >= 1);
    let n_batches = k.div_ceil(b);
    (0..n_batches).map(|i| i * b..((i + 1) * b).min(k)).collect()
}

/// Seed for batch `index`, derived from the master seed.
pub fn batch_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Initializes `k > d` atoms and the sample weights from batches of `b < d` atoms.
///
/// `base` supplies lambda, the penalty, guards and the master seed; batch runs
/// use one outer iteration, random initialization and unit weights.
pub fn undercomplete_init(x: ArrayView2<f64>, k: usize, b: usize, base: &FitSettings) -> Result<UndercompleteInit> {
    let dim = x.nrows();
    if b == 0 || b >= dim {
        return Err(Error::Precondition(format!(
            "batch size must satisfy 1 <= b < d, got b = {b}, d = {dim}"
        )));
    }
    if k <= dim {
        return Err(Error::Precondition(format!(
            "undercomplete initialization needs k > d, got k = {k}, d = {dim}"
        )));
    }
    run_batches(x, k, b, base)
}

pub(crate) fn run_batches(x: ArrayView2<f64>, k: usize, b: usize, base: &FitSettings) -> Result<UndercompleteInit> {
    let ranges = batch_ranges(k, b);
    let runs: Vec<Result<FitResult>> = ranges
        .par_iter()
        .enumerate()
        .map(|(i, range)| {
            let mut settings = base.clone();
            settings.n_atoms = range.len();
            settings.outer_iters = 1;
            settings.init = InitStrategy::Random;
            settings.coeff_init = CoeffInit::Zero;
            settings.seed = batch_seed(base.seed, i);
            fit(x, &settings)
        })
        .collect();

    let (dim, n) = x.dim();
    let mut atoms = Array2::zeros((dim, k));
    let mut written = vec![false; k];
    let mut sum = vec![0.0; n];
    let mut batch_weights = Vec::with_capacity(ranges.len());
    for (run, range) in runs.into_iter().zip(&ranges) {
        let run = run?;
        atoms.slice_mut(s![.., range.clone()]).assign(&run.dictionary.atoms());
        for j in range.clone() {
            written[j] = true;
        }
        for (acc, w) in sum.iter_mut().zip(run.weights.as_slice()) {
            *acc += w;
        }
        batch_weights.push(run.weights);
    }
    if let Some(j) = written.iter().position(|w| !w) {
        return Err(Error::Integrity(format!("atom {j} was not written by any batch")));
    }
    let n_batches = ranges.len() as f64;
    let weights = SampleWeights::new(sum.into_iter().map(|v| v / n_batches).collect())?;
    Ok(UndercompleteInit {
        dictionary: Dictionary::from_atoms(atoms)?,
        weights,
        batch_weights,
        batches: ranges,
    })
}
