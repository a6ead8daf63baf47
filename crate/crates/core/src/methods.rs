//! Baselines and competing domain-adaptation methods.
//!
//! Every method trains the same SGD logistic regression; they differ only in
//! how rows are weighted (Target, Source, All, Pred, Import) or how features
//! are laid out (FeatAug).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{check_same_dim, Dataset};
use crate::error::{validation, Result};
use crate::linmodel::{train_sgd, LinearModel, TrainConfig};
use crate::reweight::{alpha_weights, AlphaProblem};
use crate::search::AlphaEvaluator;

/// Domain probabilities are clamped to this range before weighting.
pub const PROB_MIN: f64 = 0.001;
pub const PROB_MAX: f64 = 0.999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method_name: String,
    pub model: LinearModel,
    pub test_accuracy: f64,
    pub fit_seconds: f64,
    /// The alpha used, for methods that are a point on the alpha path.
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Target,
    Source,
    All,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Target => "target",
            Baseline::Source => "source",
            Baseline::All => "all",
        }
    }

    /// `1`, `0` and `beta` respectively.
    pub fn alpha(self, problem: &AlphaProblem) -> f64 {
        match self {
            Baseline::Target => 1.0,
            Baseline::Source => 0.0,
            Baseline::All => problem.beta(),
        }
    }
}

pub fn fit_baseline(
    kind: Baseline,
    target: &Dataset,
    source: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
) -> Result<MethodResult> {
    let start = Instant::now();
    let problem = AlphaProblem::new(target, source)?;
    let alpha = kind.alpha(&problem);
    let (model, _) = problem.train(alpha, cfg, None)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    Ok(MethodResult {
        method_name: kind.name().to_string(),
        test_accuracy: model.accuracy(test)?,
        model,
        fit_seconds,
        alpha: Some(alpha),
    })
}

/// Class-balanced logistic regression of target membership (label 1) vs
/// source membership (label 0), on features only.
pub fn domain_classifier(target: &Dataset, source: &Dataset, cfg: &TrainConfig) -> Result<LinearModel> {
    check_same_dim(target, source)?;
    if target.is_empty() || source.is_empty() {
        return validation("domain classifier needs non-empty target and source");
    }
    let (combined, weights) = domain_problem(target, source)?;
    Ok(train_sgd(&combined, &weights, cfg, None)?.0)
}

/// Combined rows relabeled by domain, with weights giving both classes equal
/// total mass.
pub fn domain_problem(target: &Dataset, source: &Dataset) -> Result<(Dataset, Vec<f64>)> {
    let mut labels = vec![1u8; target.n_rows()];
    labels.resize(target.n_rows() + source.n_rows(), 0);
    let combined = target.concat(source)?.relabel(labels)?;
    let (wt, ws) = alpha_weights(0.5, target.n_rows(), source.n_rows())?;
    let mut weights = vec![wt; target.n_rows()];
    weights.resize(combined.n_rows(), ws);
    Ok((combined, weights))
}

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_MIN, PROB_MAX)
}

/// `c / (1/p - 1)` with `p` clamped to `[0.001, 0.999]`.
pub fn importance_weight(p: f64, c: f64) -> f64 {
    let p = clamp_probability(p);
    c / (1.0 / p - 1.0)
}

/// Pred weights: the clamped target-membership probability of every row,
/// target rows first.
pub fn pred_weights(target: &Dataset, source: &Dataset, domain: &LinearModel) -> Result<Vec<f64>> {
    let mut w = domain.probabilities(target)?;
    w.extend(domain.probabilities(source)?);
    Ok(w.into_iter().map(clamp_probability).collect())
}

/// Import weights: 1 for target rows, `c / (1/p - 1)` for source rows with
/// `c = n_S / n_T`.
pub fn import_weights(target: &Dataset, source: &Dataset, domain: &LinearModel) -> Result<Vec<f64>> {
    let c = source.n_rows() as f64 / target.n_rows() as f64;
    let mut w = vec![1.0; target.n_rows()];
    w.extend(domain.probabilities(source)?.into_iter().map(|p| importance_weight(p, c)));
    Ok(w)
}

fn fit_weighted(
    name: &str,
    target: &Dataset,
    source: &Dataset,
    test: &Dataset,
    cfg: &TrainConfig,
    weigh: impl Fn(&Dataset, &Dataset, &LinearModel) -> Result<Vec<f64>>,
) -> Result<MethodResult> {
    let start = Instant::now();
    let domain = domain_classifier(target, source, cfg)?;
    let weights = weigh(target, source, &domain)?;
    let combined = target.concat(source)?;
    let (model, _) = train_sgd(&combined, &weights, cfg, None)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    Ok(MethodResult {
        method_name: name.to_string(),
        test_accuracy: model.accuracy(test)?,
        model,
        fit_seconds,
        alpha: None,
    })
}

pub fn fit_pred(target: &Dataset, source: &Dataset, test: &Dataset, cfg: &TrainConfig) -> Result<MethodResult> {
    fit_weighted("pred", target, source, test, cfg, pred_weights)
}

pub fn fit_import(target: &Dataset, source: &Dataset, test: &Dataset, cfg: &TrainConfig) -> Result<MethodResult> {
    fit_weighted("import", target, source, test, cfg, import_weights)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
}

/// Source rows become `<x, x, 0>`, target rows `<x, 0, x>`.
pub fn feataug_transform(ds: &Dataset, domain: Domain) -> Dataset {
    let d = ds.n_cols();
    ds.map_rows(3 * d, |x, out| {
        out.extend_from_slice(x);
        match domain {
            Domain::Source => {
                out.extend_from_slice(x);
                out.extend(std::iter::repeat(0.0).take(d));
            }
            Domain::Target => {
                out.extend(std::iter::repeat(0.0).take(d));
                out.extend_from_slice(x);
            }
        }
    })
}

/// Unweighted training on augmented target + source; test rows are augmented
/// with the target layout. `source` may be empty.
pub fn fit_feataug(target: &Dataset, source: &Dataset, test: &Dataset, cfg: &TrainConfig) -> Result<MethodResult> {
    check_same_dim(target, source)?;
    let start = Instant::now();
    let mut train = feataug_transform(target, Domain::Target);
    if !source.is_empty() {
        train = train.concat(&feataug_transform(source, Domain::Source))?;
    }
    let (model, _) = train_sgd(&train, &vec![1.0; train.n_rows()], cfg, None)?;
    let fit_seconds = start.elapsed().as_secs_f64();
    Ok(MethodResult {
        method_name: "feataug".to_string(),
        test_accuracy: model.accuracy(&feataug_transform(test, Domain::Target))?,
        model,
        fit_seconds,
        alpha: None,
    })
}

/// Picks the L2 penalty with the best k-fold CV accuracy of the All
/// baseline. The result is meant to be held fixed for every alpha.
pub fn tune_l2_penalty(
    target: &Dataset,
    source: &Dataset,
    k: usize,
    cfg: &TrainConfig,
    candidates: &[f64],
) -> Result<(f64, Vec<(f64, f64)>)> {
    if candidates.is_empty() {
        return validation("no L2 candidates");
    }
    let beta = target.n_rows() as f64 / (target.n_rows() + source.n_rows()) as f64;
    let mut scores = Vec::with_capacity(candidates.len());
    for &l2 in candidates {
        let cfg = TrainConfig {
            l2_penalty: l2,
            ..cfg.clone()
        };
        let mut eval = AlphaEvaluator::new(target, source, k, cfg)?.with_warm_start(false);
        scores.push((l2, eval.cv_accuracy(beta)?));
    }
    let best = scores
        .iter()
        .fold(scores[0], |best, &s| if s.1 > best.1 { s } else { best });
    Ok((best.0, scores))
}
