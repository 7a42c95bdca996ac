//! Save a fitted model, load it back and continue fitting from it.

use concave_dl::synth::TwoGaussianParams;
use concave_dl::{fit, fit_from, gen_two_gaussians, ConcavePenalty, FitSettings, ModelArtifact};

fn main() -> concave_dl::Result<()> {
    let ds = gen_two_gaussians(&TwoGaussianParams::default())?;
    let settings = FitSettings::new(2, 0.4, ConcavePenalty::log(1.0)?).with_outer_iters(3);
    let result = fit(ds.x.view(), &settings)?;

    let dir = std::env::temp_dir().join("concave-dl-model-example");
    ModelArtifact::from_fit(&result, &settings, 0.0).save(&dir)?;
    let loaded = ModelArtifact::load(&dir)?;
    println!("saved and reloaded model in {}", dir.display());
    println!("dictionary identical: {}", loaded.dictionary == result.dictionary);

    let more = fit_from(ds.x.view(), &loaded.settings, loaded.start_state())?;
    for (i, h) in result.history.iter().chain(&more.history).enumerate() {
        println!("outer {i}: robust objective {:.6}", h.robust_objective);
    }
    Ok(())
}
