//! Synthetic benchmarks with planted outliers.

use ndarray::{Array1, Array2, Axis};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dict_update::Dictionary;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub dictionary: Dictionary,
    /// `k_true x n`; outlier columns are zero.
    pub coeffs: Array2<f64>,
}

/// Samples as columns of `x` (`d x n`) with outlier labels.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub x: Array2<f64>,
    pub is_outlier: Vec<bool>,
    pub ground_truth: Option<GroundTruth>,
    pub generator: String,
    pub params: serde_json::Value,
}

impl LabeledDataset {
    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_outliers(&self) -> usize {
        self.is_outlier.iter().filter(|&&o| o).count()
    }
}

/// Number of outliers for a ratio: `floor(ratio * n)`, robust to representation error.
pub fn outlier_count(ratio: f64, n: usize) -> usize {
    (ratio * n as f64 + 1e-9).floor() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoGaussianParams {
    pub n_per_cluster: usize,
    pub n_outliers: usize,
    pub seed: u64,
    /// Standard deviation of each isotropic cluster.
    pub spread: f64,
    /// Radius of the outlier ring around the data centroid.
    pub outlier_radius: f64,
    pub means: [[f64; 2]; 2],
}

impl Default for TwoGaussianParams {
    fn default() -> Self {
        TwoGaussianParams {
            n_per_cluster: 250,
            n_outliers: 50,
            seed: 0,
            spread: 0.25,
            outlier_radius: 6.0,
            means: [[3.0, 0.5], [-0.5, 3.0]],
        }
    }
}

/// Two isotropic 2D Gaussian clusters plus outliers spread uniformly over a
/// ring around the centroid of the cluster means. Samples are shuffled.
pub fn gen_two_gaussians(p: &TwoGaussianParams) -> Result<LabeledDataset> {
    if !(p.spread >= 0.0) || !p.spread.is_finite() {
        return Err(Error::Domain(format!(
            "spread must be finite and >= 0, got {}",
            p.spread
        )));
    }
    if !(p.outlier_radius >= 0.0) || !p.outlier_radius.is_finite() {
        return Err(Error::Domain(format!(
            "outlier radius must be finite and >= 0, got {}",
            p.outlier_radius
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let noise = Normal::new(0.0, p.spread).map_err(|e| Error::Domain(e.to_string()))?;
    let centroid = [
        (p.means[0][0] + p.means[1][0]) / 2.0,
        (p.means[0][1] + p.means[1][1]) / 2.0,
    ];

    let mut points: Vec<([f64; 2], bool)> = Vec::with_capacity(2 * p.n_per_cluster + p.n_outliers);
    for mean in &p.means {
        for _ in 0..p.n_per_cluster {
            points.push((
                [mean[0] + noise.sample(&mut rng), mean[1] + noise.sample(&mut rng)],
                false,
            ));
        }
    }
    for _ in 0..p.n_outliers {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        points.push((
            [
                centroid[0] + p.outlier_radius * theta.cos(),
                centroid[1] + p.outlier_radius * theta.sin(),
            ],
            true,
        ));
    }
    points.shuffle(&mut rng);

    let n = points.len();
    let mut x = Array2::zeros((2, n));
    for (j, (pt, _)) in points.iter().enumerate() {
        x[[0, j]] = pt[0];
        x[[1, j]] = pt[1];
    }
    Ok(LabeledDataset {
        x,
        is_outlier: points.iter().map(|(_, o)| *o).collect(),
        ground_truth: None,
        generator: "two-gaussians".into(),
        params: serde_json::to_value(p)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictDataParams {
    pub dim: usize,
    pub k_true: usize,
    pub n: usize,
    /// Nonzero coefficients per inlier.
    pub nnz: usize,
    pub outlier_ratio: f64,
    pub noise_sigma: f64,
    /// Outlier norm relative to the median inlier norm.
    pub outlier_gain: f64,
    pub seed: u64,
}

impl Default for DictDataParams {
    fn default() -> Self {
        DictDataParams {
            dim: 32,
            k_true: 64,
            n: 1000,
            nnz: 5,
            outlier_ratio: 0.1,
            noise_sigma: 0.05,
            outlier_gain: 3.0,
            seed: 0,
        }
    }
}

impl DictDataParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::Domain("dimension must be >= 1".into()));
        }
        if self.nnz < 1 || self.nnz > self.k_true {
            return Err(Error::Domain(format!(
                "nnz must satisfy 1 <= nnz <= k_true, got nnz = {}, k_true = {}",
                self.nnz, self.k_true
            )));
        }
        if !(0.0..1.0).contains(&self.outlier_ratio) {
            return Err(Error::Domain(format!(
                "outlier ratio must be in [0, 1), got {}",
                self.outlier_ratio
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Domain(format!(
                "noise sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if !(self.outlier_gain > 0.0) || !self.outlier_gain.is_finite() {
            return Err(Error::Domain(format!(
                "outlier gain must be > 0, got {}",
                self.outlier_gain
            )));
        }
        Ok(())
    }
}

/// Samples `D_true a + noise` with `nnz`-sparse Gaussian codes over a random
/// unit-norm dictionary; `floor(ratio * n)` of them are replaced by isotropic
/// Gaussian vectors rescaled to `outlier_gain` times the median inlier norm.
pub fn gen_dictionary_data(p: &DictDataParams) -> Result<LabeledDataset> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let dict = Dictionary::random(p.dim, p.k_true, &mut rng);
    let noise = Normal::new(0.0, p.noise_sigma).map_err(|e| Error::Domain(e.to_string()))?;

    let mut coeffs = Array2::zeros((p.k_true, p.n));
    for mut col in coeffs.axis_iter_mut(Axis(1)) {
        for j in index::sample(&mut rng, p.k_true, p.nnz) {
            col[j] = StandardNormal.sample(&mut rng);
        }
    }
    let mut x = dict.atoms().dot(&coeffs);
    x.mapv_inplace(|v| v + noise.sample(&mut rng));

    let n_out = outlier_count(p.outlier_ratio, p.n);
    let mut is_outlier = vec![false; p.n];
    if n_out > 0 {
        for i in index::sample(&mut rng, p.n, n_out) {
            is_outlier[i] = true;
        }
        let mut norms: Vec<f64> = x
            .axis_iter(Axis(1))
            .zip(&is_outlier)
            .filter(|(_, &o)| !o)
            .map(|(c, _)| c.dot(&c).sqrt())
            .collect();
        let target = p.outlier_gain * median(&mut norms);
        for (i, mut col) in x.axis_iter_mut(Axis(1)).enumerate() {
            if !is_outlier[i] {
                continue;
            }
            let v: Array1<f64> = (0..p.dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm = v.dot(&v).sqrt().max(f64::MIN_POSITIVE);
            col.assign(&(v * (target / norm)));
            coeffs.column_mut(i).fill(0.0);
        }
    }

    Ok(LabeledDataset {
        x,
        is_outlier,
        ground_truth: Some(GroundTruth {
            dictionary: dict,
            coeffs,
        }),
        generator: "dict".into(),
        params: serde_json::to_value(p)?,
    })
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 1.0;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
