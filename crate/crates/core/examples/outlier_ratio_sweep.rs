//! AUROC as the outlier ratio grows, for both initializations.
//!
//! Pass a seed count as the first argument (default 2).

use concave_dl::experiments::{run_experiment, ExperimentConfig};

fn main() -> concave_dl::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let mut cfg = ExperimentConfig::new("fig2c");
    cfg.seeds = (0..seeds).collect();
    cfg.values = Some(vec![0.05, 0.2, 0.4]);
    let out = run_experiment(&cfg)?;
    for r in &out.summary {
        println!(
            "ratio {:<5} {:<13} auroc {:.4} +- {:.4}",
            r.value, r.init, r.auroc_mean, r.auroc_std
        );
    }
    Ok(())
}
