//! Robust dictionary learning with concave losses.
//!
//! Samples are the columns of a `d x n` data matrix. A dictionary of `k`
//! unit-norm atoms and sparse codes are learned by minimizing
//! `1/2 sum_i g(||x_i - D a_i||) + lambda sum_i ||a_i||_1` for a concave,
//! non-decreasing `g`, so samples that fit badly lose influence. The per-sample
//! weights produced along the way double as outlier scores.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory:
//!
//! ```text
//! cargo run --release -p concave-dl --example penalties
//! cargo run --release -p concave-dl --example sparse_coding
//! cargo run --release -p concave-dl --example two_gaussians
//! cargo run --release -p concave-dl --example undercomplete_init
//! cargo run --release -p concave-dl --example outlier_ratio_sweep
//! cargo run --release -p concave-dl --example model_persistence
//! ```

// NaN must fail the range checks, hence `!(x > 0.0)` over `x <= 0.0`
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dict_update;
pub mod error;
pub mod experiments;
pub mod init;
pub mod io;
pub mod metrics;
pub mod penalties;
pub mod robust;
pub mod sparse_coding;
pub mod synth;

/// `d x n` matrix with one sample per column.
pub type DataMatrix = ndarray::Array2<f64>;
/// `k x n` matrix of sparse codes, one column per sample.
pub type CoeffMatrix = ndarray::Array2<f64>;

pub use dict_update::{update_dictionary, Dictionary};
pub use error::{Error, Result};
pub use init::undercomplete_init;
pub use io::ModelArtifact;
pub use metrics::{auroc, top_m_detection};
pub use penalties::ConcavePenalty;
pub use robust::{fit, fit_from, outlier_scores, FitResult, FitSettings, InitStrategy, SampleWeights};
pub use sparse_coding::{lasso, sparse_code_all, LassoSettings};
pub use synth::{gen_dictionary_data, gen_two_gaussians, LabeledDataset};
