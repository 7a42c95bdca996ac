//! Undercomplete initialization: initial weights of outliers vs inliers, and
//! the AUROC it leads to compared with random initialization.

use concave_dl::synth::DictDataParams;
use concave_dl::{
    auroc, fit, gen_dictionary_data, outlier_scores, undercomplete_init, ConcavePenalty, FitSettings, InitStrategy,
};

fn main() -> concave_dl::Result<()> {
    let ds = gen_dictionary_data(&DictDataParams {
        seed: 2,
        ..Default::default()
    })?;
    let base = FitSettings::new(96, 0.1, ConcavePenalty::log(1.0)?).with_seed(7);

    let init = undercomplete_init(ds.x.view(), 96, 16, &base)?;
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
    println!(
        "{} batches; mean initial weight: inliers {:.4}, outliers {:.4}",
        init.batches.len(),
        mean(false),
        mean(true)
    );

    for strategy in [
        InitStrategy::Random,
        InitStrategy::Undercomplete { batch_atoms: Some(16) },
    ] {
        let s = base.clone().with_init(strategy);
        let r = fit(ds.x.view(), &s)?;
        println!(
            "{strategy:?}: auroc {:.4}",
            auroc(&outlier_scores(&r.weights, s.s_min), &ds.is_outlier)?
        );
    }
    Ok(())
}
