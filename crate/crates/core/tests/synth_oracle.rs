use concave_dl::synth::{outlier_count, DictDataParams, TwoGaussianParams};
use concave_dl::{gen_dictionary_data, gen_two_gaussians};
use ndarray::Axis;

#[test]
fn inliers_are_ground_truth_plus_noise() {
    for seed in 0..3 {
        let p = DictDataParams {
            seed,
            ..Default::default()
        };
        let ds = gen_dictionary_data(&p).unwrap();
        let gt = ds.ground_truth.as_ref().unwrap();
        let resid = &ds.x - &gt.dictionary.atoms().dot(&gt.coeffs);
        let mut sq = 0.0;
        let mut count = 0;
        for (i, col) in resid.axis_iter(Axis(1)).enumerate() {
            if ds.is_outlier[i] {
                assert!(gt.coeffs.column(i).iter().all(|&v| v == 0.0));
                continue;
            }
            assert_eq!(gt.coeffs.column(i).iter().filter(|&&v| v != 0.0).count(), p.nnz);
            sq += col.dot(&col);
            count += p.dim;
        }
        // empirical noise std within 5% of sigma
        let sigma = (sq / count as f64).sqrt();
        assert!((sigma - p.noise_sigma).abs() < 0.05 * p.noise_sigma, "sigma {sigma}");
    }
}

#[test]
fn outliers_have_gain_times_median_norm() {
    let p = DictDataParams {
        seed: 4,
        outlier_ratio: 0.3,
        n: 333,
        ..Default::default()
    };
    let ds = gen_dictionary_data(&p).unwrap();
    assert_eq!(ds.n_outliers(), 99);
    let norms: Vec<f64> = ds.x.axis_iter(Axis(1)).map(|c| c.dot(&c).sqrt()).collect();
    let mut inl: Vec<f64> = norms
        .iter()
        .zip(&ds.is_outlier)
        .filter(|(_, &o)| !o)
        .map(|(n, _)| *n)
        .collect();
    inl.sort_by(f64::total_cmp);
    let m = inl.len();
    let median = if m % 2 == 1 {
        inl[m / 2]
    } else {
        0.5 * (inl[m / 2 - 1] + inl[m / 2])
    };
    for (n, _) in norms.iter().zip(&ds.is_outlier).filter(|(_, &o)| o) {
        assert!((n - p.outlier_gain * median).abs() < 1e-9 * n);
    }
}

#[test]
fn outlier_counts_round_down() {
    assert_eq!(outlier_count(0.1, 1000), 100);
    assert_eq!(outlier_count(0.3, 10), 3);
    assert_eq!(outlier_count(0.05, 250), 12);
    assert_eq!(outlier_count(0.0, 50), 0);
    for ratio in [0.05, 0.1, 0.2, 0.3, 0.4] {
        for n in [250, 500, 1000, 2000, 4000] {
            let ds = gen_dictionary_data(&DictDataParams {
                n,
                outlier_ratio: ratio,
                dim: 4,
                k_true: 6,
                nnz: 2,
                ..Default::default()
            })
            .unwrap();
            assert_eq!(ds.n_outliers(), (ratio * n as f64 + 1e-9).floor() as usize);
        }
    }
}

#[test]
fn invalid_parameters_are_rejected() {
    assert!(gen_dictionary_data(&DictDataParams {
        outlier_ratio: 1.5,
        ..Default::default()
    })
    .is_err());
    assert!(gen_dictionary_data(&DictDataParams {
        nnz: 0,
        ..Default::default()
    })
    .is_err());
    assert!(gen_dictionary_data(&DictDataParams {
        nnz: 65,
        ..Default::default()
    })
    .is_err());
    assert!(gen_dictionary_data(&DictDataParams {
        dim: 0,
        ..Default::default()
    })
    .is_err());
}

#[test]
fn generators_are_seeded() {
    let a = gen_two_gaussians(&TwoGaussianParams {
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let b = gen_two_gaussians(&TwoGaussianParams {
        seed: 3,
        ..Default::default()
    })
    .unwrap();
    let c = gen_two_gaussians(&TwoGaussianParams {
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    assert_eq!(a.x, b.x);
    assert_eq!(a.is_outlier, b.is_outlier);
    assert_ne!(a.x, c.x);
}
