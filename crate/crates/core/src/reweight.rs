//! The alpha-weighted training problem.
//!
//! Target rows each carry weight `alpha * m / n_T` and source rows
//! `(1 - alpha) * m / n_S`, `m = n_T + n_S`. Under the weight-normalized loss
//! this is exactly `alpha * mean_target_loss + (1 - alpha) * mean_source_loss`,
//! and `alpha = beta = n_T / m` gives every row weight one.

use crate::dataset::{check_same_dim, Dataset};
use crate::error::{validation, Result};
use crate::linmodel::{train_sgd, LinearModel, TrainConfig, TrainStats};

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return validation(format!("alpha {alpha} not in [0,1]"));
    }
    Ok(())
}

/// Per-row `(target_weight, source_weight)` for a given alpha.
pub fn alpha_weights(alpha: f64, n_target: usize, n_source: usize) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if n_target == 0 || n_source == 0 {
        return validation("alpha weighting needs at least one target and one source row");
    }
    let m = (n_target + n_source) as f64;
    Ok((alpha * m / n_target as f64, (1.0 - alpha) * m / n_source as f64))
}

/// Like [`alpha_weights`], but returns exactly `(1, 1)` when `alpha` equals
/// `n_T / (n_T + n_S)`; the formula would otherwise round to `1 +- ulp`.
pub fn row_weights(alpha: f64, n_target: usize, n_source: usize) -> Result<(f64, f64)> {
    let w = alpha_weights(alpha, n_target, n_source)?;
    if alpha == n_target as f64 / (n_target + n_source) as f64 {
        return Ok((1.0, 1.0));
    }
    Ok(w)
}

/// Target and source rows concatenated target-first.
#[derive(Debug, Clone)]
pub struct AlphaProblem {
    combined: Dataset,
    n_target: usize,
    n_source: usize,
}

impl AlphaProblem {
    pub fn new(target: &Dataset, source: &Dataset) -> Result<Self> {
        check_same_dim(target, source)?;
        if target.is_empty() || source.is_empty() {
            return validation("target and source must both be non-empty");
        }
        Ok(Self {
            combined: target.concat(source)?,
            n_target: target.n_rows(),
            n_source: source.n_rows(),
        })
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }

    pub fn n_source(&self) -> usize {
        self.n_source
    }

    pub fn dim(&self) -> usize {
        self.combined.n_cols()
    }

    /// `n_T / (n_T + n_S)`: the alpha that weights every row equally.
    pub fn beta(&self) -> f64 {
        self.n_target as f64 / (self.n_target + self.n_source) as f64
    }

    pub fn combined(&self) -> &Dataset {
        &self.combined
    }

    pub fn target_rows(&self) -> std::ops::Range<usize> {
        0..self.n_target
    }

    pub fn source_rows(&self) -> std::ops::Range<usize> {
        self.n_target..self.n_target + self.n_source
    }

    /// Per-row weights over the combined rows.
    pub fn weights(&self, alpha: f64) -> Result<Vec<f64>> {
        let (wt, ws) = row_weights(alpha, self.n_target, self.n_source)?;
        let mut w = vec![wt; self.n_target];
        w.resize(self.n_target + self.n_source, ws);
        Ok(w)
    }

    pub fn train(
        &self,
        alpha: f64,
        cfg: &TrainConfig,
        init: Option<&LinearModel>,
    ) -> Result<(LinearModel, TrainStats)> {
        let weights = self.weights(alpha)?;
        train_sgd(&self.combined, &weights, cfg, init)
    }

    /// `alpha * target_01_error + (1 - alpha) * source_01_error`.
    pub fn empirical_alpha_error(&self, model: &LinearModel, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let preds = model.predict_dataset(&self.combined)?;
        let labels = self.combined.labels();
        let error = |range: std::ops::Range<usize>| {
            let n = range.len() as f64;
            range.filter(|&i| preds[i] != labels[i]).count() as f64 / n
        };
        Ok(alpha * error(self.target_rows()) + (1.0 - alpha) * error(self.source_rows()))
    }
}

/// Trains the minimizer of the empirical alpha-error on `target + source`.
pub fn train_at_alpha(
    target: &Dataset,
    source: &Dataset,
    alpha: f64,
    cfg: &TrainConfig,
    init: Option<&LinearModel>,
) -> Result<(LinearModel, TrainStats)> {
    AlphaProblem::new(target, source)?.train(alpha, cfg, init)
}
