//! Weighted logistic regression trained by mini-batch SGD.
//!
//! The objective is the weight-normalized log-loss
//! `sum_i w_i * logloss_i / sum_i w_i + l2 * |coef|^2`, so multiplying every
//! weight by a constant changes neither the loss nor the optimum. Rows with
//! zero weight never enter a mini-batch.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{rng_for, Dataset};
use crate::error::{validation, Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the log-loss.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearningRate {
    Constant { eta0: f64 },
    /// `eta0 / (1 + decay * t)` with `t` counting mini-batch updates.
    InverseScaling { eta0: f64, decay: f64 },
}

impl LearningRate {
    fn at(&self, step: u64) -> f64 {
        match *self {
            LearningRate::Constant { eta0 } => eta0,
            LearningRate::InverseScaling { eta0, decay } => eta0 / (1.0 + decay * step as f64),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub l2_penalty: f64,
    pub learning_rate: LearningRate,
    pub max_epochs: usize,
    /// Stop once an epoch improves the loss by less than this fraction.
    pub tolerance: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2_penalty: 1e-3,
            learning_rate: LearningRate::InverseScaling {
                eta0: 0.1,
                decay: 1e-3,
            },
            max_epochs: 200,
            tolerance: 1e-4,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.max_epochs < 1 {
            return bad("max_epochs must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return bad("l2_penalty must be finite and non-negative");
        }
        if !(self.tolerance >= 0.0) {
            return bad("tolerance must be non-negative");
        }
        let eta0 = match self.learning_rate {
            LearningRate::Constant { eta0 } => eta0,
            LearningRate::InverseScaling { eta0, decay } => {
                if !(decay >= 0.0 && decay.is_finite()) {
                    return bad("learning-rate decay must be finite and non-negative");
                }
                eta0
            }
        };
        if !(eta0 > 0.0 && eta0.is_finite()) {
            return bad("eta0 must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub epochs_run: usize,
    pub final_loss: f64,
    pub converged: bool,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Log-loss from the decision value `z`, computed as a softplus so that
/// `1 - p` never cancels. Clamping the loss to this range is the same as
/// clamping `p`.
#[inline]
fn log_loss(z: f64, y: u8) -> f64 {
    let t = if y == 1 { -z } else { z };
    let softplus = t.max(0.0) + (-t.abs()).exp().ln_1p();
    softplus.clamp(-(-PROB_CLAMP).ln_1p(), -PROB_CLAMP.ln())
}

impl LinearModel {
    pub fn zeros(d: usize) -> Self {
        Self {
            coefficients: vec![0.0; d],
            intercept: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_finite(&self) -> bool {
        self.intercept.is_finite() && self.coefficients.iter().all(|c| c.is_finite())
    }

    #[inline]
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.coefficients, x) + self.intercept
    }

    /// `P(y = 1 | x)` under the logistic link.
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.decision(x))
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return validation(format!("model has {} coefficients, data has {d} columns", self.dim()));
        }
        Ok(())
    }

    /// Row-major `features` with `self.dim()` columns. Label 1 iff the
    /// decision value is strictly positive.
    pub fn predict(&self, features: &[f64], n_cols: usize) -> Result<Vec<u8>> {
        self.check_dim(n_cols)?;
        if n_cols == 0 || features.len() % n_cols != 0 {
            return validation("feature matrix is not a whole number of rows");
        }
        Ok(features
            .chunks_exact(n_cols)
            .map(|x| u8::from(self.decision(x) > 0.0))
            .collect())
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<u8>> {
        self.predict(ds.features(), ds.n_cols())
    }

    pub fn probabilities(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.check_dim(ds.n_cols())?;
        Ok(ds.rows().map(|x| self.probability(x)).collect())
    }

    /// Fraction of rows whose prediction matches the label.
    pub fn accuracy(&self, ds: &Dataset) -> Result<f64> {
        if ds.is_empty() {
            return validation("accuracy of an empty dataset");
        }
        let preds = self.predict_dataset(ds)?;
        let hits = preds.iter().zip(ds.labels()).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / ds.n_rows() as f64)
    }

    /// Flat `key=value` text; floats carry 17 significant digits.
    pub fn to_text(&self, config: Option<&TrainConfig>) -> String {
        let mut out = String::from("# linear model, key=value\n");
        writeln!(out, "d={}", self.dim()).unwrap();
        writeln!(out, "intercept={:.16e}", self.intercept).unwrap();
        for (j, c) in self.coefficients.iter().enumerate() {
            writeln!(out, "coef.{j}={c:.16e}").unwrap();
        }
        if let Some(cfg) = config {
            writeln!(out, "config.l2_penalty={:.16e}", cfg.l2_penalty).unwrap();
            match cfg.learning_rate {
                LearningRate::Constant { eta0 } => {
                    writeln!(out, "config.learning_rate=constant").unwrap();
                    writeln!(out, "config.eta0={eta0:.16e}").unwrap();
                }
                LearningRate::InverseScaling { eta0, decay } => {
                    writeln!(out, "config.learning_rate=inverse_scaling").unwrap();
                    writeln!(out, "config.eta0={eta0:.16e}").unwrap();
                    writeln!(out, "config.decay={decay:.16e}").unwrap();
                }
            }
            writeln!(out, "config.max_epochs={}", cfg.max_epochs).unwrap();
            writeln!(out, "config.tolerance={:.16e}", cfg.tolerance).unwrap();
            writeln!(out, "config.batch_size={}", cfg.batch_size).unwrap();
            writeln!(out, "config.seed={}", cfg.seed).unwrap();
        }
        out
    }

    /// Parses [`LinearModel::to_text`] output. The config echo is returned
    /// when present.
    pub fn from_text(text: &str) -> Result<(LinearModel, Option<TrainConfig>)> {
        let mut d: Option<usize> = None;
        let mut intercept: Option<f64> = None;
        let mut coefs: Vec<Option<f64>> = Vec::new();
        let mut cfg_fields = std::collections::HashMap::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let fmt_err = |message: String| Error::Format { line, message };
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| fmt_err(format!("expected key=value, found {raw:?}")))?;
            let num = || value.parse::<f64>().map_err(|_| fmt_err(format!("bad number {value:?}")));
            match key {
                "d" => {
                    let n: usize = value.parse().map_err(|_| fmt_err(format!("bad d {value:?}")))?;
                    d = Some(n);
                    coefs = vec![None; n];
                }
                "intercept" => intercept = Some(num()?),
                k if k.starts_with("coef.") => {
                    let j: usize = k[5..].parse().map_err(|_| fmt_err(format!("bad key {k:?}")))?;
                    let slot = coefs
                        .get_mut(j)
                        .ok_or_else(|| fmt_err(format!("coefficient {j} out of range or before d")))?;
                    *slot = Some(num()?);
                }
                k if k.starts_with("config.") => {
                    cfg_fields.insert(k[7..].to_string(), (line, value.to_string()));
                }
                k => return Err(fmt_err(format!("unknown key {k:?}"))),
            }
        }

        let missing = |what: &str| Error::Format {
            line: 0,
            message: format!("missing {what}"),
        };
        d.ok_or_else(|| missing("d"))?;
        let intercept = intercept.ok_or_else(|| missing("intercept"))?;
        let coefficients = coefs
            .into_iter()
            .enumerate()
            .map(|(j, c)| c.ok_or_else(|| missing(&format!("coef.{j}"))))
            .collect::<Result<Vec<_>>>()?;

        let config = if cfg_fields.is_empty() {
            None
        } else {
            let get = |k: &str| -> Result<&str> {
                cfg_fields
                    .get(k)
                    .map(|(_, v)| v.as_str())
                    .ok_or_else(|| missing(&format!("config.{k}")))
            };
            let f = |k: &str| -> Result<f64> {
                let v = get(k)?;
                v.parse().map_err(|_| Error::Format {
                    line: cfg_fields[k].0,
                    message: format!("bad number {v:?}"),
                })
            };
            let u = |k: &str| -> Result<u64> {
                let v = get(k)?;
                v.parse().map_err(|_| Error::Format {
                    line: cfg_fields[k].0,
                    message: format!("bad integer {v:?}"),
                })
            };
            let learning_rate = match get("learning_rate")? {
                "constant" => LearningRate::Constant { eta0: f("eta0")? },
                "inverse_scaling" => LearningRate::InverseScaling {
                    eta0: f("eta0")?,
                    decay: f("decay")?,
                },
                other => {
                    return Err(Error::Format {
                        line: cfg_fields["learning_rate"].0,
                        message: format!("unknown learning rate {other:?}"),
                    })
                }
            };
            Some(TrainConfig {
                l2_penalty: f("l2_penalty")?,
                learning_rate,
                max_epochs: u("max_epochs")? as usize,
                tolerance: f("tolerance")?,
                batch_size: u("batch_size")? as usize,
                seed: u("seed")?,
            })
        };

        let model = LinearModel {
            coefficients,
            intercept,
        };
        if !model.is_finite() {
            return validation("model contains non-finite values");
        }
        Ok((model, config))
    }
}

fn check_weights(ds: &Dataset, weights: &[f64]) -> Result<f64> {
    if weights.len() != ds.n_rows() {
        return validation(format!(
            "{} weights for {} rows",
            weights.len(),
            ds.n_rows()
        ));
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
        return validation(format!("weight {i} is {} (must be finite and >= 0)", weights[i]));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return validation("all weights are zero");
    }
    Ok(total)
}

/// `sum_i w_i * logloss_i / sum_i w_i + l2_penalty * |coef|^2`.
pub fn weighted_loss(model: &LinearModel, ds: &Dataset, weights: &[f64], l2_penalty: f64) -> Result<f64> {
    model.check_dim(ds.n_cols())?;
    let total = check_weights(ds, weights)?;
    let data: f64 = ds
        .rows()
        .zip(ds.labels())
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|((x, &y), w)| w * log_loss(model.decision(x), y))
        .sum();
    Ok(data / total + l2_penalty * dot(&model.coefficients, &model.coefficients))
}

/// Analytic gradient of [`weighted_loss`] as `(d/dcoef, d/dintercept)`,
/// ignoring the probability clamp.
pub fn weighted_loss_gradient(
    model: &LinearModel,
    ds: &Dataset,
    weights: &[f64],
    l2_penalty: f64,
) -> Result<(Vec<f64>, f64)> {
    model.check_dim(ds.n_cols())?;
    let total = check_weights(ds, weights)?;
    let mut grad = vec![0.0; ds.n_cols()];
    let mut grad_b = 0.0;
    for ((x, &y), &w) in ds.rows().zip(ds.labels()).zip(weights) {
        if w == 0.0 {
            continue;
        }
        let r = w * (model.probability(x) - f64::from(y));
        grad.iter_mut().zip(x).for_each(|(g, xi)| *g += r * xi);
        grad_b += r;
    }
    for (g, c) in grad.iter_mut().zip(&model.coefficients) {
        *g = *g / total + 2.0 * l2_penalty * c;
    }
    Ok((grad, grad_b / total))
}

/// Fills `order` with row `i` repeated about `weight * n / total` times,
/// rounded systematically from the offset `u` in `[0, 1)`.
fn resample(active: &[usize], scaled: &[f64], total: f64, n: f64, u: f64, order: &mut Vec<usize>) {
    order.clear();
    let (mut cum, mut taken) = (0.0, 0usize);
    for &i in active {
        cum += scaled[i];
        let upto = (cum * n / total + u) as usize;
        order.extend(std::iter::repeat(i).take(upto.saturating_sub(taken)));
        taken = taken.max(upto);
    }
}

/// Minimizes [`weighted_loss`] by mini-batch SGD, starting from `init` when
/// given and from zero otherwise.
///
/// Weights are rescaled to mean one over the positive-weight rows. Each
/// epoch draws as many rows as there are positive-weight rows, every row in
/// proportion to its weight (systematic resampling), and shuffles them; a row
/// then contributes an unweighted gradient. With equal weights this is one
/// shuffle of the rows. Sampling rather than scaling gradients keeps steps
/// bounded when a few rows carry most of the weight. After epoch `e` the
/// candidate model is the average of all iterates from epochs `ceil(e/2)..=e`
/// (tail averaging), which damps SGD noise without keeping the early, biased
/// iterates. Training stops once a candidate improves the full objective by
/// less than `tolerance` relative to the best so far (the starting point
/// counts), or after `max_epochs`; the best candidate is returned.
pub fn train_sgd(
    ds: &Dataset,
    weights: &[f64],
    cfg: &TrainConfig,
    init: Option<&LinearModel>,
) -> Result<(LinearModel, TrainStats)> {
    cfg.validate()?;
    if ds.is_empty() {
        return validation("cannot train on an empty dataset");
    }
    check_weights(ds, weights)?;
    let mut model = match init {
        Some(m) => {
            m.check_dim(ds.n_cols())?;
            m.clone()
        }
        None => LinearModel::zeros(ds.n_cols()),
    };

    let active: Vec<usize> = (0..ds.n_rows()).filter(|&i| weights[i] > 0.0).collect();
    // Equal weights are taken as exactly uniform; a summed mean could be off
    // by an ulp and break the equivalence with unweighted training.
    let first = weights[active[0]];
    let mean_weight = if active.iter().all(|&i| weights[i] == first) {
        first
    } else {
        active.iter().map(|&i| weights[i]).sum::<f64>() / active.len() as f64
    };
    let scaled: Vec<f64> = weights.iter().map(|w| w / mean_weight).collect();
    let labels = ds.labels();

    let d = ds.n_cols();
    let objective = |m: &LinearModel| {
        let data: f64 = active
            .iter()
            .map(|&i| scaled[i] * log_loss(m.decision(ds.row(i)), labels[i]))
            .sum();
        data / active.len() as f64 + cfg.l2_penalty * dot(&m.coefficients, &m.coefficients)
    };
    let mut rng = rng_for(cfg.seed, 0);
    let mut order = Vec::with_capacity(active.len() + 1);
    let n_active = active.len() as f64;
    let total_weight: f64 = active.iter().map(|&i| scaled[i]).sum();
    let mut grad = vec![0.0; d];
    let mut step: u64 = 0;
    let mut best_loss = objective(&model);
    let mut best = model.clone();
    // prefix[e] holds the sum of the per-epoch iterate averages before epoch e,
    // flattened as coefficients followed by the intercept.
    let mut prefix: Vec<Vec<f64>> = vec![vec![0.0; d + 1]];
    let mut epoch_sum = vec![0.0; d + 1];
    let mut candidate = LinearModel::zeros(d);
    let mut stats = TrainStats {
        epochs_run: 0,
        final_loss: best_loss,
        converged: false,
    };

    for epoch in 0..cfg.max_epochs {
        resample(&active, &scaled, total_weight, n_active, rng.gen(), &mut order);
        order.shuffle(&mut rng);
        epoch_sum.iter_mut().for_each(|a| *a = 0.0);
        let mut updates = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            for &i in batch {
                let x = ds.row(i);
                let r = model.probability(x) - f64::from(labels[i]);
                grad.iter_mut().zip(x).for_each(|(g, xi)| *g += r * xi);
                grad_b += r;
            }
            let eta = cfg.learning_rate.at(step);
            let inv_b = 1.0 / batch.len() as f64;
            let shrink = 2.0 * cfg.l2_penalty;
            model
                .coefficients
                .iter_mut()
                .zip(&grad)
                .for_each(|(c, g)| *c -= eta * (g * inv_b + shrink * *c));
            model.intercept -= eta * grad_b * inv_b;
            epoch_sum[..d]
                .iter_mut()
                .zip(&model.coefficients)
                .for_each(|(a, c)| *a += c);
            epoch_sum[d] += model.intercept;
            step += 1;
            updates += 1;
        }
        let inv_n = 1.0 / updates as f64;
        let mut next = prefix[epoch].clone();
        next.iter_mut().zip(&epoch_sum).for_each(|(p, s)| *p += s * inv_n);
        prefix.push(next);
        // Average over the second half of the epochs run so far.
        let first = (epoch + 1) / 2;
        let span = (epoch + 1 - first) as f64;
        let (hi, lo) = (&prefix[epoch + 1], &prefix[first]);
        candidate
            .coefficients
            .iter_mut()
            .enumerate()
            .for_each(|(j, c)| *c = (hi[j] - lo[j]) / span);
        candidate.intercept = (hi[d] - lo[d]) / span;

        let loss = objective(&candidate);
        stats.epochs_run = epoch + 1;
        if !loss.is_finite() || !model.is_finite() {
            return validation("SGD diverged; lower the learning rate");
        }
        let improvement = best_loss - loss;
        if loss < best_loss {
            best_loss = loss;
            best.clone_from(&candidate);
        }
        stats.final_loss = best_loss;
        if improvement < cfg.tolerance * best_loss.abs() {
            stats.converged = true;
            break;
        }
    }
    Ok((best, stats))
}
