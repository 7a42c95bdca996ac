use concave_dl::dict_update::{dictionary_objective, scale_columns, UNIT_NORM_TOL};
use concave_dl::{update_dictionary, Dictionary, SampleWeights};
use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

fn random_weights(rng: &mut ChaCha8Rng, n: usize) -> SampleWeights {
    SampleWeights::new((0..n).map(|_| rng.random_range(0.0..2.0)).collect()).unwrap()
}

/// Projected gradient descent on the product of unit spheres, from `d0`,
/// until the objective changes by less than `tol`.
fn projected_gradient(d0: &Dictionary, x: &Array2<f64>, a: &Array2<f64>, s: &SampleWeights, tol: f64) -> f64 {
    let xt = scale_columns(x.view(), s);
    let at = scale_columns(a.view(), s);
    let b = at.dot(&at.t());
    let c = xt.dot(&at.t());
    // Lipschitz bound of the gradient: trace of B bounds its largest eigenvalue
    let step = 1.0 / b.diag().sum().max(1e-12);
    let f = |d: &Array2<f64>| 0.5 * (&xt - &d.dot(&at)).mapv(|v| v * v).sum();
    let mut d = d0.atoms().to_owned();
    let mut prev = f(&d);
    for _ in 0..200_000 {
        let grad = d.dot(&b) - &c;
        d.scaled_add(-step, &grad);
        for mut col in d.axis_iter_mut(Axis(1)) {
            let n = col.dot(&col).sqrt();
            if n > 0.0 {
                col.mapv_inplace(|v| v / n);
            }
        }
        let cur = f(&d);
        if (prev - cur).abs() < tol {
            return cur;
        }
        prev = cur;
    }
    prev
}

#[test]
fn converged_sweeps_match_projected_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let d0 = Dictionary::random(4, 3, &mut rng);
        let x = gaussian(&mut rng, 4, 10);
        let a = gaussian(&mut rng, 3, 10);
        let s = random_weights(&mut rng, 10);
        let before = dictionary_objective(&d0, x.view(), a.view(), &s).unwrap();
        let d1 = update_dictionary(&d0, x.view(), a.view(), &s, 1).unwrap();
        let after = dictionary_objective(&d1, x.view(), a.view(), &s).unwrap();
        assert!(after <= before * (1.0 + 1e-10), "{after} > {before}");
        assert!(d1.max_norm_deviation() <= UNIT_NORM_TOL);
        let converged = update_dictionary(&d0, x.view(), a.view(), &s, 500).unwrap();
        let bcd = dictionary_objective(&converged, x.view(), a.view(), &s).unwrap();
        let oracle = projected_gradient(&d0, &x, &a, &s, 1e-6);
        assert!(
            bcd <= 1.05 * oracle,
            "block coordinate descent {bcd} vs projected gradient {oracle}"
        );
    }
}

#[test]
fn every_sweep_descends() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..30 {
        let (dim, k, n) = (rng.random_range(2..8), rng.random_range(1..10), rng.random_range(1..30));
        let mut d = Dictionary::random(dim, k, &mut rng);
        let x = gaussian(&mut rng, dim, n);
        // sparse codes with some atoms unused
        let a = Array2::from_shape_fn((k, n), |(j, _)| {
            if j % 3 == 2 {
                0.0
            } else {
                rng.sample::<f64, _>(StandardNormal) * f64::from(rng.random_bool(0.5))
            }
        });
        let s = random_weights(&mut rng, n);
        let mut prev = dictionary_objective(&d, x.view(), a.view(), &s).unwrap();
        for _ in 0..5 {
            d = update_dictionary(&d, x.view(), a.view(), &s, 1).unwrap();
            let cur = dictionary_objective(&d, x.view(), a.view(), &s).unwrap();
            assert!(cur <= prev + 1e-10 * prev.abs().max(1.0), "{cur} > {prev}");
            assert!(d.max_norm_deviation() <= UNIT_NORM_TOL);
            prev = cur;
        }
    }
}

#[test]
fn prescaled_inputs_give_identical_output() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let d0 = Dictionary::random(5, 6, &mut rng);
        let x = gaussian(&mut rng, 5, 12);
        let mut a = gaussian(&mut rng, 6, 12);
        a.row_mut(4).fill(0.0);
        let s = random_weights(&mut rng, 12);
        let direct = update_dictionary(&d0, x.view(), a.view(), &s, 2).unwrap();
        let xt = scale_columns(x.view(), &s);
        let at = scale_columns(a.view(), &s);
        let scaled = update_dictionary(&d0, xt.view(), at.view(), &SampleWeights::ones(12), 2).unwrap();
        assert_eq!(direct, scaled);
    }
}

#[test]
fn zero_weight_samples_have_no_influence() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..20 {
        let d0 = Dictionary::random(4, 5, &mut rng);
        let mut x = gaussian(&mut rng, 4, 9);
        let mut a = gaussian(&mut rng, 5, 9);
        a.row_mut(2).fill(0.0);
        let mut w: Vec<f64> = (0..9).map(|_| rng.random_range(0.1..2.0)).collect();
        w[3] = 0.0;
        w[7] = 0.0;
        let s = SampleWeights::new(w).unwrap();
        let base = update_dictionary(&d0, x.view(), a.view(), &s, 1).unwrap();
        for i in [3, 7] {
            x.column_mut(i).mapv_inplace(|v| v * 100.0 + 7.0);
        }
        assert_eq!(base, update_dictionary(&d0, x.view(), a.view(), &s, 1).unwrap());
    }
}
