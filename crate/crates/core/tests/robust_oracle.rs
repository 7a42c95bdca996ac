use concave_dl::robust::{refresh_weights, residual_norms, robust_objective, surrogate_objective};
use concave_dl::sparse_coding::{kkt_tolerance, optimality_residual};
use concave_dl::synth::DictDataParams;
use concave_dl::{
    fit, gen_dictionary_data, undercomplete_init, ConcavePenalty, Dictionary, FitSettings, SampleWeights,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

fn penalty_set() -> Vec<ConcavePenalty> {
    vec![
        ConcavePenalty::Identity,
        ConcavePenalty::lq(0.5).unwrap(),
        ConcavePenalty::log(1.0).unwrap(),
        ConcavePenalty::capped_l1(2.0).unwrap(),
        ConcavePenalty::scad(1.0, 3.7).unwrap(),
        ConcavePenalty::mcp(1.0, 2.0).unwrap(),
    ]
}

/// Straight-line recomputation with explicit loops.
fn naive_objectives(
    x: &Array2<f64>,
    d: &Dictionary,
    a: &Array2<f64>,
    s: &[f64],
    lambda: f64,
    p: &ConcavePenalty,
) -> (f64, f64) {
    let (dim, n) = x.dim();
    let k = d.n_atoms();
    let (mut robust, mut weighted, mut l1) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let mut r2 = 0.0;
        for row in 0..dim {
            let mut v = x[[row, i]];
            for j in 0..k {
                v -= d.atoms()[[row, j]] * a[[j, i]];
            }
            r2 += v * v;
        }
        robust += p.loss(r2).unwrap();
        weighted += s[i] * r2;
        for j in 0..k {
            l1 += a[[j, i]].abs();
        }
    }
    (0.5 * robust + lambda * l1, 0.5 * weighted + lambda * l1)
}

#[test]
fn objectives_match_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for p in penalty_set() {
        let d = Dictionary::random(5, 7, &mut rng);
        let x = gaussian(&mut rng, 5, 20);
        let a = gaussian(&mut rng, 7, 20);
        let s: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..3.0)).collect();
        let sw = SampleWeights::new(s.clone()).unwrap();
        let (robust, weighted) = naive_objectives(&x, &d, &a, &s, 0.3, &p);
        let got_r = robust_objective(x.view(), &d, a.view(), 0.3, &p).unwrap();
        let got_w = surrogate_objective(x.view(), &d, a.view(), &sw, 0.3).unwrap();
        assert!((got_r - robust).abs() <= 1e-12 * robust.abs().max(1.0), "{p}");
        assert!((got_w - weighted).abs() <= 1e-12 * weighted.abs().max(1.0));
    }
}

#[test]
fn objective_special_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let d = Dictionary::random(3, 4, &mut rng);
    let x = gaussian(&mut rng, 3, 6);
    let zero = Array2::zeros((4, 6));
    let half_norms: f64 = 0.5 * x.columns().into_iter().map(|c| c.dot(&c).sqrt()).sum::<f64>();
    let got = robust_objective(x.view(), &d, zero.view(), 0.7, &ConcavePenalty::Identity).unwrap();
    assert!((got - half_norms).abs() < 1e-12);
    // unit weights give plain dictionary learning; zero weights with zero codes give 0
    let a = gaussian(&mut rng, 4, 6);
    let ones = surrogate_objective(x.view(), &d, a.view(), &SampleWeights::ones(6), 0.2).unwrap();
    let r = residual_norms(x.view(), &d, a.view()).unwrap();
    let plain = 0.5 * r.iter().map(|v| v * v).sum::<f64>() + 0.2 * a.iter().map(|v| v.abs()).sum::<f64>();
    assert!((ones - plain).abs() < 1e-12);
    let zeros = SampleWeights::new(vec![0.0; 6]).unwrap();
    assert_eq!(
        surrogate_objective(x.view(), &d, zero.view(), &zeros, 0.2).unwrap(),
        0.0
    );
}

#[test]
fn non_unit_atoms_are_an_integrity_error() {
    let mut atoms = Dictionary::normalized(Array2::eye(2)).unwrap().into_inner();
    atoms[[0, 0]] = 1.0 + 1e-6;
    assert!(Dictionary::from_atoms(atoms).is_err());
}

#[test]
fn weights_are_tangent_slopes_at_refresh() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for p in penalty_set() {
        let x = gaussian(&mut rng, 6, 40);
        let settings = FitSettings::new(4, 0.05, p).with_outer_iters(2).with_seed(3);
        let r = fit(x.view(), &settings).unwrap();
        let s = refresh_weights(x.view(), &r.dictionary, r.coeffs.view(), &settings).unwrap();
        assert_eq!(s, r.weights);
        let res = residual_norms(x.view(), &r.dictionary, r.coeffs.view()).unwrap();
        for (i, &ri) in res.iter().enumerate() {
            let u0 = ri * ri;
            if ri <= settings.r_floor {
                continue;
            }
            // s_i u0 equals F'(u0) u0, the linear part of the tangent at u0
            let tangent_slope = p.loss_supergradient(u0).unwrap();
            let w = s.as_slice()[i];
            assert!(
                (w * u0 - tangent_slope * u0).abs() <= 1e-10 * u0.max(1.0),
                "{p}, sample {i}"
            );
        }
    }
}

#[test]
fn inner_and_outer_descent() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    for (t, p) in penalty_set().into_iter().enumerate() {
        let x = gaussian(&mut rng, 8, 60);
        let settings = FitSettings::new(6, 0.1, p).with_outer_iters(6).with_seed(t as u64);
        let r = fit(x.view(), &settings).unwrap();
        for h in &r.history {
            let mut prev = h.surrogate_start;
            for &v in &h.inner_objectives {
                assert!(v <= prev + 1e-10 * prev.abs().max(1.0), "{p}: inner {v} > {prev}");
                prev = v;
            }
        }
        for w in r.history.windows(2) {
            let (a, b) = (w[0].robust_objective, w[1].robust_objective);
            assert!(b <= a + 1e-9 * a.abs(), "{p}: outer {b} > {a}");
        }
        assert_eq!(r.history.len(), 6);
        assert!(r.dictionary.max_norm_deviation() <= 1e-10);
    }
}

#[test]
fn runs_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let x = gaussian(&mut rng, 10, 80);
    let settings = FitSettings::new(16, 0.1, ConcavePenalty::log(1.0).unwrap())
        .with_outer_iters(3)
        .with_seed(9)
        .with_init(concave_dl::InitStrategy::Undercomplete { batch_atoms: Some(4) });
    let a = fit(x.view(), &settings).unwrap();
    let b = fit(x.view(), &settings).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.dictionary, b.dictionary);
    assert_eq!(a.weights, b.weights);
}

#[test]
fn frozen_unit_weights_give_plain_dictionary_learning() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let x = gaussian(&mut rng, 6, 50);
    let mut settings = FitSettings::new(5, 0.2, ConcavePenalty::Identity).with_outer_iters(1);
    settings.freeze_weights = true;
    let r = fit(x.view(), &settings).unwrap();
    assert_eq!(r.weights, SampleWeights::ones(50));
    assert!(r.dictionary.max_norm_deviation() <= 1e-10);
    for i in 0..50 {
        let res = optimality_residual(r.dictionary.atoms(), x.column(i), r.coeffs.column(i), 0.2);
        assert!(res <= kkt_tolerance(x.column(i)), "sample {i}: {res}");
    }
}

#[test]
fn exactly_representable_data_is_reconstructed() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let truth = Dictionary::random(4, 4, &mut rng);
    let x = truth.atoms().dot(&gaussian(&mut rng, 4, 30));
    let settings = FitSettings::new(4, 1e-9, ConcavePenalty::Identity).with_outer_iters(3);
    let r = fit(x.view(), &settings).unwrap();
    let res = residual_norms(x.view(), &r.dictionary, r.coeffs.view()).unwrap();
    assert!(
        res.iter().all(|&v| v < 1e-6),
        "max residual {}",
        res.iter().fold(0.0f64, |m, &v| m.max(v))
    );
    assert!(r.weights.as_slice().iter().all(|&w| w > 1e5));
}

#[test]
fn undercomplete_weights_are_smaller_on_outliers() {
    for seed in 0..5 {
        let ds = gen_dictionary_data(&DictDataParams {
            seed,
            ..Default::default()
        })
        .unwrap();
        let base = FitSettings::new(64, 0.1, ConcavePenalty::log(1.0).unwrap()).with_seed(seed + 1000);
        let init = undercomplete_init(ds.x.view(), 64, 16, &base).unwrap();
        let mean = |outlier: bool| {
            let v: Vec<f64> = init
                .weights
                .as_slice()
                .iter()
                .zip(&ds.is_outlier)
                .filter(|(_, &o)| o == outlier)
                .map(|(w, _)| *w)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(
            mean(true) < mean(false),
            "seed {seed}: outliers {} inliers {}",
            mean(true),
            mean(false)
        );
        assert_eq!(init.batches.len(), 4);
    }
}
