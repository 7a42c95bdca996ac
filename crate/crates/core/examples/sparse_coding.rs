//! Lasso coding of a single sample and a weighted batch.

use concave_dl::sparse_coding::{lasso_objective, optimality_residual};
use concave_dl::{lasso, sparse_code_all, Dictionary, LassoSettings, SampleWeights};
use ndarray::{array, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> concave_dl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dict = Dictionary::random(6, 10, &mut rng);
    let truth = array![0.0, 1.5, 0.0, 0.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let x = dict.atoms().dot(&truth);

    let settings = LassoSettings::default();
    for lambda in [0.01, 0.1, 1.0] {
        let sol = lasso(dict.atoms(), x.view(), lambda, &settings, None)?;
        println!(
            "lambda {lambda:<5} objective {:.6} kkt residual {:.1e} sweeps {:>3} code {:.3}",
            lasso_objective(dict.atoms(), x.view(), sol.coef.view(), lambda),
            optimality_residual(dict.atoms(), x.view(), sol.coef.view(), lambda),
            sol.sweeps,
            sol.coef
        );
    }

    // a small weight means a large effective lambda: that sample's code shrinks
    let batch = Array2::from_shape_fn((6, 3), |(i, _)| x[i]);
    let s = SampleWeights::new(vec![1.0, 0.05, 0.0])?;
    let codes = sparse_code_all(&dict, batch.view(), 0.1, &s, 1e-12, &settings, None)?;
    for (j, w) in s.as_slice().iter().enumerate() {
        let l1: f64 = codes.coeffs.column(j).iter().map(|v| v.abs()).sum();
        println!("weight {w:<5} -> ||a||_1 = {l1:.4}");
    }
    Ok(())
}
