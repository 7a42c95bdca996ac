//! Outlier detection on two 2D clusters: log penalty vs identity vs plain
//! dictionary learning scored by reconstruction error.

use concave_dl::robust::reconstruction_errors;
use concave_dl::synth::TwoGaussianParams;
use concave_dl::{fit, gen_two_gaussians, outlier_scores, top_m_detection, ConcavePenalty, FitSettings};

fn main() -> concave_dl::Result<()> {
    println!("seed  log  identity  uniform   (outliers among the 50 highest scores)");
    for seed in 0..5 {
        let ds = gen_two_gaussians(&TwoGaussianParams {
            seed,
            ..Default::default()
        })?;
        let mut found = Vec::new();
        for (penalty, freeze) in [
            (ConcavePenalty::log(1.0)?, false),
            (ConcavePenalty::Identity, false),
            (ConcavePenalty::Identity, true),
        ] {
            let mut s = FitSettings::new(2, 0.4, penalty)
                .with_outer_iters(10)
                .with_seed(seed + 1000);
            s.freeze_weights = freeze;
            let r = fit(ds.x.view(), &s)?;
            let scores = if freeze {
                reconstruction_errors(ds.x.view(), &r.dictionary, r.coeffs.view())?
            } else {
                outlier_scores(&r.weights, s.s_min)
            };
            found.push(top_m_detection(&scores, &ds.is_outlier, 50)?);
        }
        println!("{seed:>4} {:>4} {:>9} {:>8}", found[0], found[1], found[2]);
    }
    Ok(())
}
