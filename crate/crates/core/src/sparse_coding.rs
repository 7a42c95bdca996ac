//! Per-sample Lasso by cyclic coordinate descent on the Gram matrix.
//!
//! Every column is solved independently through the same code path, so a
//! single-sample call and the corresponding column of a batched call are
//! bitwise identical.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::dict_update::Dictionary;
use crate::error::{shape_err, Error, Result};
use crate::robust::SampleWeights;
use crate::CoeffMatrix;

/// Atoms with a squared norm below this are skipped and their coefficient is held at 0.
const MIN_ATOM_SQ_NORM: f64 = 1e-24;
/// Active-set sweeps between exact solves on the current support.
const POLISH_EVERY: usize = 10;
/// Support Gram matrices whose Cholesky pivot ratio falls below this are treated as singular.
const SINGULAR_RATIO: f64 = 1e-10;

/// Default weight below which a sample is excluded from sparse coding.
pub const DEFAULT_S_MIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LassoSettings {
    /// Maximum number of full coordinate sweeps.
    pub max_iters: usize,
    /// Stop once the largest coefficient change in a sweep falls below this
    /// and the optimality conditions hold.
    pub tol: f64,
}

impl Default for LassoSettings {
    fn default() -> Self {
        LassoSettings {
            max_iters: 1000,
            tol: 1e-7,
        }
    }
}

impl LassoSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Domain("lasso max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::Domain(format!("lasso tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub coef: Array1<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

/// Coefficient matrix from a batched call, plus how many columns hit `max_iters`.
#[derive(Debug, Clone)]
pub struct SparseCodes {
    pub coeffs: CoeffMatrix,
    pub nonconverged: usize,
}

#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// `D^T D`, computed entry by entry so the result does not depend on how the
/// caller batches samples.
pub(crate) fn gram(d: ArrayView2<f64>) -> Array2<f64> {
    let k = d.ncols();
    let mut g = Array2::zeros((k, k));
    for i in 0..k {
        for j in i..k {
            let v = d.column(i).dot(&d.column(j));
            g[[i, j]] = v;
            g[[j, i]] = v;
        }
    }
    g
}

pub(crate) fn atom_dots(d: ArrayView2<f64>, x: ArrayView1<f64>) -> Array1<f64> {
    d.columns().into_iter().map(|c| c.dot(&x)).collect()
}

/// `1/2 ||x - D a||^2 + lambda ||a||_1`.
pub fn lasso_objective(d: ArrayView2<f64>, x: ArrayView1<f64>, a: ArrayView1<f64>, lambda: f64) -> f64 {
    let r = &x - &d.dot(&a);
    0.5 * r.dot(&r) + lambda * a.iter().map(|v| v.abs()).sum::<f64>()
}

/// Largest violation of the subgradient optimality conditions of the Lasso at `a`.
pub fn optimality_residual(d: ArrayView2<f64>, x: ArrayView1<f64>, a: ArrayView1<f64>, lambda: f64) -> f64 {
    let r = &x - &d.dot(&a);
    let corr = atom_dots(d, r.view());
    let usable: Vec<bool> = d.columns().into_iter().map(|c| c.dot(&c) >= MIN_ATOM_SQ_NORM).collect();
    kkt_violation(corr.view(), a, lambda, &usable)
}

fn kkt_violation(corr: ArrayView1<f64>, a: ArrayView1<f64>, lambda: f64, usable: &[bool]) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..a.len() {
        if !usable[j] {
            continue;
        }
        let v = if a[j] == 0.0 {
            (corr[j].abs() - lambda).max(0.0)
        } else {
            (corr[j] - lambda * a[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Optimality tolerance used to certify convergence.
pub fn kkt_tolerance(x: ArrayView1<f64>) -> f64 {
    1e-5 * x.dot(&x).sqrt().max(1.0)
}

/// Solves `min_a 1/2 ||x - D a||^2 + lambda ||a||_1`.
///
/// Non-convergence is reported through [`LassoSolution::converged`], not as an error.
pub fn lasso(
    d: ArrayView2<f64>,
    x: ArrayView1<f64>,
    lambda: f64,
    settings: &LassoSettings,
    warm: Option<ArrayView1<f64>>,
) -> Result<LassoSolution> {
    settings.validate()?;
    if x.len() != d.nrows() {
        return Err(shape_err(format!(
            "sample has length {} but dictionary has {} rows",
            x.len(),
            d.nrows()
        )));
    }
    if let Some(w) = warm {
        if w.len() != d.ncols() {
            return Err(shape_err(format!(
                "warm start has length {} but dictionary has {} atoms",
                w.len(),
                d.ncols()
            )));
        }
    }
    check_lambda(lambda)?;
    let g = gram(d);
    let dtx = atom_dots(d, x);
    Ok(solve_column(g.view(), dtx.view(), x, lambda, settings, warm))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || lambda.is_nan() {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(())
}

fn solve_column(
    g: ArrayView2<f64>,
    dtx: ArrayView1<f64>,
    x: ArrayView1<f64>,
    lambda: f64,
    settings: &LassoSettings,
    warm: Option<ArrayView1<f64>>,
) -> LassoSolution {
    let k = g.nrows();
    let mut a = match warm {
        Some(w) => w.to_owned(),
        None => Array1::zeros(k),
    };
    if !lambda.is_finite() {
        a.fill(0.0);
        return LassoSolution {
            coef: a,
            converged: true,
            sweeps: 0,
        };
    }
    let usable: Vec<bool> = (0..k).map(|j| g[[j, j]] >= MIN_ATOM_SQ_NORM).collect();
    for j in 0..k {
        if !usable[j] {
            a[j] = 0.0;
        }
    }
    // q = D^T x - G a, the correlation of each atom with the residual
    let mut q = &dtx - &g.dot(&a);
    let kkt_tol = 0.5 * kkt_tolerance(x);

    let mut sweeps = 0;
    let mut converged = false;
    let mut active: Vec<usize> = Vec::with_capacity(k);
    while sweeps < settings.max_iters {
        sweeps += 1;
        let all = 0..k;
        let max_delta = cd_pass(g, &mut a, &mut q, lambda, all.filter(|&j| usable[j]));
        if max_delta < settings.tol {
            // refresh to drop accumulated drift before certifying
            q = &dtx - &g.dot(&a);
            if kkt_violation(q.view(), a.view(), lambda, &usable) <= kkt_tol {
                converged = true;
                break;
            }
            continue;
        }
        // iterate on the nonzero coordinates until they settle, then re-check all
        active.clear();
        active.extend((0..k).filter(|&j| a[j] != 0.0));
        let mut inner = 0;
        while sweeps < settings.max_iters {
            sweeps += 1;
            inner += 1;
            if active_pass(g, &mut a, &mut q, lambda, &active) < settings.tol {
                break;
            }
            if inner % POLISH_EVERY == 0 && sweeps < settings.max_iters {
                polish_support(g, dtx, &mut a, &mut q, lambda);
            }
        }
        q = &dtx - &g.dot(&a);
        // only for slow runs, and never at the cap so a longer run always
        // extends a shorter one
        if inner >= POLISH_EVERY && sweeps < settings.max_iters {
            polish_support(g, dtx, &mut a, &mut q, lambda);
        }
    }
    LassoSolution {
        coef: a,
        converged,
        sweeps,
    }
}

/// `1/2 a^T G a - a^T D^T x + lambda ||a||_1` given `q = D^T x - G a`.
fn reduced_objective(dtx: ArrayView1<f64>, a: &Array1<f64>, q: &Array1<f64>, lambda: f64) -> f64 {
    let mut v = 0.0;
    for j in 0..a.len() {
        v += -0.5 * a[j] * (dtx[j] + q[j]) + lambda * a[j].abs();
    }
    v
}

/// Solves the Lasso restricted to the current support and signs exactly.
///
/// While the atoms on the support are linearly dependent, the coefficients are
/// moved along a null direction of `G_AA` (residual unchanged, `||a||_1` not
/// increased) until one reaches zero. The step toward the exact solution is cut
/// at the first sign change, and replaces `a` only if the objective does not rise.
fn polish_support(g: ArrayView2<f64>, dtx: ArrayView1<f64>, a: &mut Array1<f64>, q: &mut Array1<f64>, lambda: f64) {
    *q = &dtx - &g.dot(&*a);
    let mut cand = a.clone();
    let (support, z) = loop {
        let support: Vec<usize> = (0..cand.len()).filter(|&j| cand[j] != 0.0).collect();
        let m = support.len();
        if m == 0 {
            return;
        }
        let gram = nalgebra::DMatrix::from_fn(m, m, |r, c| g[[support[r], support[c]]]);
        let rhs = nalgebra::DVector::from_fn(m, |r, _| dtx[support[r]] - lambda * cand[support[r]].signum());
        if let Some(chol) = gram.clone().cholesky() {
            let pivots = chol.l_dirty().diagonal().map(|v| v * v);
            if pivots.min() > SINGULAR_RATIO * pivots.max() {
                let z: Vec<f64> = chol.solve(&rhs).iter().copied().collect();
                break (support, z);
            }
        }
        // dependent atoms: find a null direction
        let eig = gram.symmetric_eigen();
        let imin = eig.eigenvalues.imin();
        let mut v: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
        let slope: f64 = support.iter().zip(&v).map(|(&j, vi)| cand[j].signum() * vi).sum();
        if slope > 0.0 {
            v.iter_mut().for_each(|vi| *vi = -*vi);
        }
        // first coordinate to hit zero along v
        let mut hit: Option<(usize, f64)> = None;
        for (r, &j) in support.iter().enumerate() {
            if v[r] != 0.0 && v[r].signum() != cand[j].signum() {
                let t = -cand[j] / v[r];
                if hit.is_none_or(|(_, best)| t < best) {
                    hit = Some((r, t));
                }
            }
        }
        let Some((r_hit, t)) = hit else { return };
        for (r, &j) in support.iter().enumerate() {
            cand[j] += t * v[r];
        }
        cand[support[r_hit]] = 0.0;
    };

    if z.iter().any(|v| !v.is_finite()) {
        return;
    }
    // step toward z, stopping where the first coefficient would change sign;
    // the objective is convex along the segment with z as its minimizer
    let mut step = 1.0f64;
    let mut hit: Option<usize> = None;
    for (r, &j) in support.iter().enumerate() {
        if z[r] == 0.0 || z[r].signum() != cand[j].signum() {
            let t = cand[j] / (cand[j] - z[r]);
            if t < step {
                step = t;
                hit = Some(j);
            }
        }
    }
    let mut next = cand.clone();
    for (r, &j) in support.iter().enumerate() {
        next[j] += step * (z[r] - cand[j]);
    }
    if let Some(j) = hit {
        next[j] = 0.0;
    }
    let next_q = &dtx - &g.dot(&next);
    if reduced_objective(dtx, &next, &next_q, lambda) <= reduced_objective(dtx, a, q, lambda) {
        *a = next;
        *q = next_q;
    }
}

/// Coordinate-descent pass restricted to `active`; only the active entries of
/// `q` are kept current.
fn active_pass(g: ArrayView2<f64>, a: &mut Array1<f64>, q: &mut Array1<f64>, lambda: f64, active: &[usize]) -> f64 {
    let mut max_delta = 0.0f64;
    for &j in active {
        let gjj = g[[j, j]];
        let old = a[j];
        let new = soft_threshold(q[j] + gjj * old, lambda) / gjj;
        let delta = new - old;
        if delta != 0.0 {
            a[j] = new;
            let row = g.row(j);
            for &i in active {
                q[i] -= delta * row[i];
            }
            max_delta = max_delta.max(delta.abs());
        }
    }
    max_delta
}

/// One coordinate-descent pass over `coords`; returns the largest coefficient change.
fn cd_pass(
    g: ArrayView2<f64>,
    a: &mut Array1<f64>,
    q: &mut Array1<f64>,
    lambda: f64,
    coords: impl Iterator<Item = usize>,
) -> f64 {
    let mut max_delta = 0.0f64;
    for j in coords {
        let gjj = g[[j, j]];
        let old = a[j];
        let new = soft_threshold(q[j] + gjj * old, lambda) / gjj;
        let delta = new - old;
        if delta != 0.0 {
            a[j] = new;
            // G is symmetric; the row is contiguous
            q.scaled_add(-delta, &g.row(j));
            max_delta = max_delta.max(delta.abs());
        }
    }
    max_delta
}

/// Sparse-codes every column of `x` with regularization `lambda / s_j`.
///
/// Columns with `s_j <= s_min` are set to zero. `warm`, when given, supplies
/// starting coefficients for each column.
pub fn sparse_code_all(
    dict: &Dictionary,
    x: ArrayView2<f64>,
    lambda: f64,
    s: &SampleWeights,
    s_min: f64,
    settings: &LassoSettings,
    warm: Option<ArrayView2<f64>>,
) -> Result<SparseCodes> {
    settings.validate()?;
    check_lambda(lambda)?;
    let d = dict.atoms();
    let (dim, n) = x.dim();
    let k = d.ncols();
    if dim != d.nrows() {
        return Err(shape_err(format!("data has {dim} rows, dictionary has {}", d.nrows())));
    }
    if s.len() != n {
        return Err(shape_err(format!("{} weights for {n} samples", s.len())));
    }
    if let Some(w) = warm {
        if w.dim() != (k, n) {
            return Err(shape_err(format!("warm start is {:?}, expected {:?}", w.dim(), (k, n))));
        }
    }
    let g = gram(d);
    let weights = s.as_slice();

    let cols: Vec<LassoSolution> = (0..n)
        .into_par_iter()
        .map(|j| {
            let sj = weights[j];
            if sj <= s_min {
                return LassoSolution {
                    coef: Array1::zeros(k),
                    converged: true,
                    sweeps: 0,
                };
            }
            let xj = x.column(j);
            let dtx = atom_dots(d, xj);
            let start = warm.as_ref().map(|w| w.column(j));
            solve_column(g.view(), dtx.view(), xj, lambda / sj, settings, start)
        })
        .collect();

    let mut coeffs = Array2::zeros((k, n));
    let mut nonconverged = 0;
    for (j, sol) in cols.into_iter().enumerate() {
        if !sol.converged {
            nonconverged += 1;
        }
        coeffs.index_axis_mut(Axis(1), j).assign(&sol.coef);
    }
    Ok(SparseCodes { coeffs, nonconverged })
}
