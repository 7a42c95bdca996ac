//! Unit-norm dictionaries and the weighted block-coordinate dictionary update.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{shape_err, Error, Result};
use crate::robust::SampleWeights;

/// Atom norms must be within this of 1 after any update.
pub const UNIT_NORM_TOL: f64 = 1e-10;
/// Atoms whose coefficient energy `B_jj` is at or below this are treated as unused.
pub const UNUSED_ATOM_ENERGY: f64 = 1e-12;

/// A `d x k` matrix whose columns (atoms) have unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: Array2<f64>,
}

impl Dictionary {
    /// Wraps an atom matrix that is already unit-norm.
    pub fn from_atoms(atoms: Array2<f64>) -> Result<Self> {
        let dict = Dictionary { atoms };
        dict.check(UNIT_NORM_TOL)?;
        Ok(dict)
    }

    /// Normalizes every column. Fails on zero or non-finite columns.
    pub fn normalized(mut atoms: Array2<f64>) -> Result<Self> {
        for (j, mut col) in atoms.axis_iter_mut(Axis(1)).enumerate() {
            let norm = col.dot(&col).sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(Error::Domain(format!("atom {j} cannot be normalized (norm {norm})")));
            }
            col.mapv_inplace(|v| v / norm);
        }
        Dictionary::from_atoms(atoms)
    }

    /// Atoms drawn i.i.d. from a spherical Gaussian, then normalized.
    pub fn random<R: Rng + ?Sized>(dim: usize, n_atoms: usize, rng: &mut R) -> Self {
        loop {
            let atoms = Array2::from_shape_simple_fn((dim, n_atoms), || rng.sample::<f64, _>(StandardNormal));
            if let Ok(d) = Dictionary::normalized(atoms) {
                return d;
            }
        }
    }

    pub fn atoms(&self) -> ArrayView2<'_, f64> {
        self.atoms.view()
    }

    pub fn atom(&self, j: usize) -> ArrayView1<'_, f64> {
        self.atoms.column(j)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.atoms
    }

    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    /// Largest `| ||d_j|| - 1 |` over all atoms.
    pub fn max_norm_deviation(&self) -> f64 {
        self.atoms
            .columns()
            .into_iter()
            .map(|c| (c.dot(&c).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Verifies finiteness and unit norm within `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        if self.atoms.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integrity("dictionary has non-finite entries".into()));
        }
        let dev = self.max_norm_deviation();
        if dev > tol {
            return Err(Error::Integrity(format!(
                "dictionary atom norm deviates from 1 by {dev:e} (tolerance {tol:e})"
            )));
        }
        Ok(())
    }
}

/// Weighted reconstruction objective `1/2 sum_i s_i ||x_i - D a_i||^2`.
pub fn dictionary_objective(
    dict: &Dictionary,
    x: ArrayView2<f64>,
    a: ArrayView2<f64>,
    s: &SampleWeights,
) -> Result<f64> {
    check_shapes(dict, x, a, s)?;
    let r = &x - &dict.atoms().dot(&a);
    Ok(0.5
        * r.axis_iter(Axis(1))
            .zip(s.as_slice())
            .map(|(col, &w)| w * col.dot(&col))
            .sum::<f64>())
}

fn check_shapes(dict: &Dictionary, x: ArrayView2<f64>, a: ArrayView2<f64>, s: &SampleWeights) -> Result<()> {
    let (d, n) = x.dim();
    if d != dict.dim() {
        return Err(shape_err(format!("data has {d} rows, dictionary has {}", dict.dim())));
    }
    if a.dim() != (dict.n_atoms(), n) {
        return Err(shape_err(format!(
            "coefficients are {:?}, expected {:?}",
            a.dim(),
            (dict.n_atoms(), n)
        )));
    }
    if s.len() != n {
        return Err(shape_err(format!("{} weights for {n} samples", s.len())));
    }
    Ok(())
}

/// Scales every column `i` of `m` by `sqrt(s_i)`.
pub fn scale_columns(m: ArrayView2<f64>, s: &SampleWeights) -> Array2<f64> {
    let mut out = m.to_owned();
    for (mut col, &w) in out.axis_iter_mut(Axis(1)).zip(s.as_slice()) {
        let r = w.sqrt();
        col.mapv_inplace(|v| v * r);
    }
    out
}

/// Runs `sweeps` passes of atom-wise block coordinate descent on
/// `min_D 1/2 sum_i s_i ||x_i - D a_i||^2` subject to unit-norm atoms.
///
/// Each atom is moved to the projection onto the sphere of its unconstrained
/// minimizer `d_j + (c_j - D b_j) / B_jj`, which never increases the objective.
/// An atom with no coefficient energy is replaced by the normalized sample with
/// the largest weighted residual (residuals are measured once per sweep, when
/// the first unused atom is met; lowest index wins ties and each sample is used
/// at most once per sweep). The replacement is sign-oriented and only accepted
/// if the objective does not increase.
pub fn update_dictionary(
    dict: &Dictionary,
    x: ArrayView2<f64>,
    a: ArrayView2<f64>,
    s: &SampleWeights,
    sweeps: usize,
) -> Result<Dictionary> {
    check_shapes(dict, x, a, s)?;
    if sweeps < 1 {
        return Err(Error::Domain("dictionary update needs at least one sweep".into()));
    }
    let xt = scale_columns(x, s);
    let at = scale_columns(a, s);
    let b = at.dot(&at.t());
    let c = xt.dot(&at.t());
    let mut d = dict.atoms().to_owned();
    let k = d.ncols();
    let n = x.ncols();

    for _ in 0..sweeps {
        let mut energy: Option<Vec<f64>> = None;
        let mut taken = vec![false; n];
        for j in 0..k {
            let bjj = b[[j, j]];
            let grad: Array1<f64> = &c.column(j) - &d.dot(&b.column(j));
            if bjj > UNUSED_ATOM_ENERGY {
                let mut u = d.column(j).to_owned();
                u.scaled_add(1.0 / bjj, &grad);
                let norm = u.dot(&u).sqrt();
                if norm > 0.0 && norm.is_finite() {
                    d.column_mut(j).assign(&(u / norm));
                }
                continue;
            }

            // linear term of the objective in d_j; with unit norm the objective
            // is const - d_j . e
            let mut e = grad;
            e.scaled_add(bjj, &d.column(j));
            let energy = energy.get_or_insert_with(|| {
                let r = &xt - &d.dot(&at);
                r.axis_iter(Axis(1)).map(|col| col.dot(&col)).collect()
            });
            let mut best: Option<usize> = None;
            for i in 0..n {
                if taken[i] || !(energy[i] > 0.0) {
                    continue;
                }
                if best.is_none_or(|bi| energy[i] > energy[bi]) {
                    best = Some(i);
                }
            }
            let Some(i) = best else { continue };
            // scaled sample; same direction as x_i
            let xi = xt.column(i);
            let norm = xi.dot(&xi).sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                continue;
            }
            let mut cand = xi.mapv(|v| v / norm);
            if cand.dot(&e) < 0.0 {
                cand.mapv_inplace(|v| -v);
            }
            if cand.dot(&e) >= d.column(j).dot(&e) {
                d.column_mut(j).assign(&cand);
                taken[i] = true;
            }
        }
    }
    Dictionary::from_atoms(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ones(n: usize) -> SampleWeights {
        SampleWeights::ones(n)
    }

    #[test]
    fn one_atom_per_sample_recovers_normalized_samples() {
        let x = array![[3.0, 0.0, 1.0], [4.0, 2.0, -1.0], [0.0, 0.0, 1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d0 = Dictionary::random(3, 3, &mut rng);
        let a = Array2::<f64>::eye(3);
        let d1 = update_dictionary(&d0, x.view(), a.view(), &ones(3), 1).unwrap();
        for j in 0..3 {
            let xj = x.column(j);
            let expect = &xj / xj.dot(&xj).sqrt();
            for (p, q) in d1.atom(j).iter().zip(expect.iter()) {
                assert_abs_diff_eq!(p, q, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_weights_leave_dictionary_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d0 = Dictionary::random(4, 3, &mut rng);
        let x = Array2::from_shape_fn((4, 6), |(i, j)| (i * 7 + j) as f64 - 10.0);
        let a = Array2::from_shape_fn((3, 6), |(i, j)| (i + j) as f64 * 0.1);
        let s = SampleWeights::new(vec![0.0; 6]).unwrap();
        let d1 = update_dictionary(&d0, x.view(), a.view(), &s, 3).unwrap();
        assert_eq!(d0, d1);
    }

    #[test]
    fn unused_atom_takes_largest_residual_sample() {
        // atom 1 unused; sample 2 has the largest residual
        let d0 = Dictionary::normalized(array![[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
        let x = array![[1.0, 2.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 5.0]];
        let a = array![[1.0, 2.0, 0.0], [0.0, 0.0, 0.0]];
        let d1 = update_dictionary(&d0, x.view(), a.view(), &ones(3), 1).unwrap();
        assert_abs_diff_eq!(d1.atom(1)[2].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d1.atom(0)[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shape_and_sweep_errors() {
        let d0 = Dictionary::normalized(Array2::eye(2)).unwrap();
        let x = Array2::<f64>::zeros((3, 4));
        let a = Array2::<f64>::zeros((2, 4));
        assert!(matches!(
            update_dictionary(&d0, x.view(), a.view(), &ones(4), 1),
            Err(Error::Shape(_))
        ));
        let x = Array2::<f64>::zeros((2, 4));
        assert!(update_dictionary(&d0, x.view(), a.view(), &ones(3), 1).is_err());
        assert!(update_dictionary(&d0, x.view(), a.view(), &ones(4), 0).is_err());
    }

    #[test]
    fn dictionary_constructors() {
        assert!(Dictionary::from_atoms(array![[1.0, 0.5], [0.0, 0.5]]).is_err());
        assert!(Dictionary::normalized(array![[1.0, 0.0], [0.0, 0.0]]).is_err());
        let d = Dictionary::normalized(array![[3.0], [4.0]]).unwrap();
        assert_abs_diff_eq!(d.atom(0)[0], 0.6, epsilon = 1e-15);
        assert!(d.max_norm_deviation() < 1e-15);
    }
}
