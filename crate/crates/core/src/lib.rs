//! Domain adaptation by loss reweighting.
//!
//! A linear classifier is trained on target and source rows whose losses are
//! mixed as `alpha * target_error + (1 - alpha) * source_error`. The mixing
//! weight is tuned on target cross-validation accuracy by a bracketing
//! golden-section search, with warm-started SGD reusing coefficients from
//! nearby probes.
//!
//! Modules:
//! - [`dataset`]: loading, synthetic generation, splits and folds.
//! - [`linmodel`]: weighted logistic regression trained by SGD.
//! - [`reweight`]: the alpha-weighted training problem.
//! - [`search`]: bracket + golden-section, grid and random search over alpha.
//! - [`methods`]: baselines and competing adaptation methods.
//! - [`bound`]: the convex error bound over alpha.
//! - [`cli`]: command workflows and reports.

pub mod bound;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod linmodel;
pub mod methods;
pub mod reweight;
pub mod search;

pub use dataset::{Dataset, SyntheticConfig};
pub use error::{Error, Result};
pub use linmodel::{LearningRate, LinearModel, TrainConfig, TrainStats};
pub use reweight::AlphaProblem;
pub use search::{AlphaEvaluator, SearchReport, Strategy};
