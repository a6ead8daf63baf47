//! Searching for the mixing weight alpha.
//!
//! [`find_weighting`] first narrows `[0, 1]` by a binary bracket search, then
//! runs golden-section search inside the bracket. Each probe is a k-fold
//! cross-validated target accuracy computed by an [`AlphaEvaluator`], which
//! caches per-fold coefficients and warm-starts new probes from the nearest
//! alpha already trained. Grid and random search are provided for comparison.
//!
//! The search routines are generic over [`Objective`], so they also run on
//! plain functions (see [`FnObjective`]).

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{check_same_dim, kfold_indices, rng_for, Dataset, Fold};
use crate::error::{validation, Error, Result};
use crate::linmodel::{train_sgd, LinearModel, TrainConfig, TrainStats};
use crate::reweight::{check_alpha, row_weights};

/// `1 / phi`.
pub const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Objective differences at or below this are ties.
pub const TIE_EPS: f64 = 1e-9;

/// Probes closer than this share one cached evaluation.
pub const ALPHA_MATCH_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub alpha: f64,
    pub accuracy: f64,
    pub train_seconds: f64,
    pub epochs_total: usize,
}

/// A maximized function of alpha that remembers what it has evaluated.
pub trait Objective {
    /// Value at `alpha`; repeated calls at the same alpha must not re-evaluate.
    fn evaluate(&mut self, alpha: f64) -> Result<f64>;

    /// Distinct evaluations, in order.
    fn probes(&self) -> &[Probe];

    fn eval_count(&self) -> usize {
        self.probes().len()
    }

    /// Values closer than this are treated as equal by the search logic.
    fn tie_eps(&self) -> f64 {
        TIE_EPS
    }
}

fn cached(probes: &[Probe], alpha: f64) -> Option<f64> {
    probes
        .iter()
        .find(|p| (p.alpha - alpha).abs() <= ALPHA_MATCH_EPS)
        .map(|p| p.accuracy)
}

/// Wraps a closure as a cached [`Objective`].
pub struct FnObjective<F> {
    f: F,
    probes: Vec<Probe>,
    tie_eps: f64,
}

impl<F: FnMut(f64) -> f64> FnObjective<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            probes: Vec::new(),
            tie_eps: TIE_EPS,
        }
    }

    pub fn with_tie_eps(mut self, eps: f64) -> Self {
        self.tie_eps = eps;
        self
    }
}

impl<F: FnMut(f64) -> f64> Objective for FnObjective<F> {
    fn evaluate(&mut self, alpha: f64) -> Result<f64> {
        if let Some(v) = cached(&self.probes, alpha) {
            return Ok(v);
        }
        let value = (self.f)(alpha);
        if value.is_nan() {
            return validation(format!("objective is NaN at {alpha}"));
        }
        self.probes.push(Probe {
            alpha,
            accuracy: value,
            train_seconds: 0.0,
            epochs_total: 0,
        });
        Ok(value)
    }

    fn probes(&self) -> &[Probe] {
        &self.probes
    }

    fn tie_eps(&self) -> f64 {
        self.tie_eps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub left: f64,
    pub mid: f64,
    pub right: f64,
}

/// Binary narrowing of `[left, right]` until the midpoint scores at least as
/// well as both ends or the interval is narrower than `delta`.
pub fn find_bracket(mut left: f64, mut right: f64, delta: f64, obj: &mut impl Objective) -> Result<Bracket> {
    if !(0.0 <= left && left < right && right <= 1.0) {
        return validation(format!("bad bracket interval [{left}, {right}]"));
    }
    let eps = obj.tie_eps();
    loop {
        let mid = (left + right) / 2.0;
        let a_l = obj.evaluate(left)?;
        let a_m = obj.evaluate(mid)?;
        let a_r = obj.evaluate(right)?;
        if right - left < delta || a_m >= a_l.max(a_r) - eps {
            return Ok(Bracket { left, mid, right });
        }
        if a_l <= a_r + eps {
            left = mid;
        } else {
            right = mid;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenResult {
    pub alpha: f64,
    pub value: f64,
    pub iterations: usize,
}

fn best_of(points: &[(f64, f64)], eps: f64) -> (f64, f64) {
    // highest value; ties go to the smaller alpha
    let mut best = points[0];
    for &(a, v) in &points[1..] {
        if v > best.1 + eps || ((v - best.1).abs() <= eps && a < best.0) {
            best = (a, v);
        }
    }
    best
}

/// Golden-section maximization inside a valid bracket. Each iteration shrinks
/// the interval by `1/phi`; stops once it is narrower than `delta` and
/// returns the best alpha probed during the call.
pub fn golden_section_search(bracket: Bracket, delta: f64, obj: &mut impl Objective) -> Result<GoldenResult> {
    let Bracket { left, mid, right } = bracket;
    if !(left < mid && mid < right) {
        return validation(format!("bracket ({left}, {mid}, {right}) is not ordered"));
    }
    let a_l = obj.evaluate(left)?;
    let a_m = obj.evaluate(mid)?;
    let a_r = obj.evaluate(right)?;
    let eps = obj.tie_eps();
    if a_m < a_l.max(a_r) - eps {
        return validation("bracket midpoint does not dominate its ends");
    }
    let mut seen = vec![(left, a_l), (mid, a_m), (right, a_r)];
    let mut iterations = 0;

    let (mut a, mut b) = (left, right);
    if b - a >= delta {
        let mut x1 = b - INV_PHI * (b - a);
        let mut x2 = a + INV_PHI * (b - a);
        let mut f1 = obj.evaluate(x1)?;
        let mut f2 = obj.evaluate(x2)?;
        seen.push((x1, f1));
        seen.push((x2, f2));
        loop {
            iterations += 1;
            let keep_left = f1 >= f2 - eps;
            if keep_left {
                b = x2;
            } else {
                a = x1;
            }
            if b - a < delta {
                break;
            }
            if keep_left {
                x2 = x1;
                f2 = f1;
                x1 = b - INV_PHI * (b - a);
                f1 = obj.evaluate(x1)?;
                seen.push((x1, f1));
            } else {
                x1 = x2;
                f1 = f2;
                x2 = a + INV_PHI * (b - a);
                f2 = obj.evaluate(x2)?;
                seen.push((x2, f2));
            }
        }
    }
    let (alpha, value) = best_of(&seen, eps);
    Ok(GoldenResult {
        alpha,
        value,
        iterations,
    })
}

/// Bracket, endpoint checks, then golden-section search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaximizeOutcome {
    pub alpha: f64,
    pub value: f64,
    pub bracket: Bracket,
    pub bracket_evaluations: usize,
    pub golden_iterations: usize,
}

pub fn maximize(obj: &mut impl Objective, delta: f64) -> Result<MaximizeOutcome> {
    check_delta(delta)?;
    let before = obj.eval_count();
    let bracket = find_bracket(0.0, 1.0, delta, obj)?;
    let bracket_evaluations = obj.eval_count() - before;
    let a_l = obj.evaluate(bracket.left)?;
    let a_m = obj.evaluate(bracket.mid)?;
    let a_r = obj.evaluate(bracket.right)?;

    let endpoint = |alpha, value| MaximizeOutcome {
        alpha,
        value,
        bracket,
        bracket_evaluations,
        golden_iterations: 0,
    };
    let eps = obj.tie_eps();
    if a_r > a_m + eps {
        return Ok(endpoint(bracket.right, a_r));
    }
    if a_l > a_m + eps {
        return Ok(endpoint(bracket.left, a_l));
    }
    let g = golden_section_search(bracket, delta, obj)?;
    Ok(MaximizeOutcome {
        alpha: g.alpha,
        value: g.value,
        bracket,
        bracket_evaluations,
        golden_iterations: g.iterations,
    })
}

/// Upper bound on golden-section evaluations for a bracket of `width`.
pub fn golden_iteration_bound(width: f64, delta: f64) -> usize {
    if width < delta {
        return 0;
    }
    ((delta / width).ln() / INV_PHI.ln()).ceil() as usize
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= 0.5) {
        return validation(format!("delta {delta} not in (0, 0.5]"));
    }
    Ok(())
}

/// `{0, delta, 2 delta, ..., 1}`.
pub fn grid_points(delta: f64) -> Result<Vec<f64>> {
    check_delta(delta)?;
    let steps = (1.0 / delta).round();
    if (steps * delta - 1.0).abs() < 1e-9 {
        let n = steps as usize;
        return Ok((0..=n).map(|i| i as f64 / n as f64).collect());
    }
    let mut pts: Vec<f64> = (0..).map(|i| i as f64 * delta).take_while(|&a| a < 1.0).collect();
    pts.push(1.0);
    Ok(pts)
}

/// Evaluates every grid point; ties go to the smaller alpha.
pub fn grid_maximize(obj: &mut impl Objective, delta: f64) -> Result<(f64, f64)> {
    let pts = grid_points(delta)?;
    let mut seen = Vec::with_capacity(pts.len());
    for a in pts {
        seen.push((a, obj.evaluate(a)?));
    }
    Ok(best_of(&seen, obj.tie_eps()))
}

/// `n_probes` uniform draws of alpha.
pub fn random_alphas(n_probes: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 0);
    (0..n_probes).map(|_| rng.gen_range(0.0..=1.0)).collect()
}

pub fn random_maximize(obj: &mut impl Objective, n_probes: usize, seed: u64) -> Result<(f64, f64)> {
    if n_probes < 1 {
        return validation("random search needs at least one probe");
    }
    let mut seen = Vec::with_capacity(n_probes);
    for a in random_alphas(n_probes, seed) {
        seen.push((a, obj.evaluate(a)?));
    }
    Ok(best_of(&seen, obj.tie_eps()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Gss,
    Grid,
    Random,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Gss => "gss",
            Strategy::Grid => "grid",
            Strategy::Random => "random",
        })
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gss" => Ok(Strategy::Gss),
            "grid" => Ok(Strategy::Grid),
            "random" => Ok(Strategy::Random),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReport {
    pub strategy: Strategy,
    pub delta: f64,
    pub k: usize,
    pub warm_start: bool,
    pub probes: Vec<Probe>,
    pub alpha_star: f64,
    pub cv_accuracy: f64,
    pub bracket: Option<Bracket>,
    pub bracket_evaluations: usize,
    pub golden_iterations: usize,
    /// Sum of probe training times.
    pub search_seconds: f64,
    pub refit_seconds: f64,
    pub refit_epochs: usize,
    pub final_model: LinearModel,
}

impl SearchReport {
    pub fn total_epochs(&self) -> usize {
        self.probes.iter().map(|p| p.epochs_total).sum()
    }

    /// Best accuracy seen after each probe.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.probes
            .iter()
            .scan(f64::NEG_INFINITY, |best, p| {
                *best = best.max(p.accuracy);
                Some(*best)
            })
            .collect()
    }

    /// Tab-separated record stream: a header block of `key\tvalue` lines
    /// followed by one `probe\t...` line per evaluation.
    pub fn to_records(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("strategy\t{}\n", self.strategy));
        out.push_str(&format!("delta\t{}\n", self.delta));
        out.push_str(&format!("k\t{}\n", self.k));
        out.push_str(&format!("warm_start\t{}\n", self.warm_start));
        out.push_str(&format!("alpha_star\t{:.17}\n", self.alpha_star));
        out.push_str(&format!("cv_accuracy\t{:.17}\n", self.cv_accuracy));
        out.push_str(&format!("evaluations\t{}\n", self.probes.len()));
        out.push_str(&format!("bracket_evaluations\t{}\n", self.bracket_evaluations));
        out.push_str(&format!("golden_iterations\t{}\n", self.golden_iterations));
        out.push_str("# probe\tindex\talpha\tcv_accuracy\ttrain_seconds\tepochs_total\n");
        for (i, p) in self.probes.iter().enumerate() {
            out.push_str(&format!(
                "probe\t{i}\t{:.17}\t{:.17}\t{:.6}\t{}\n",
                p.alpha, p.accuracy, p.train_seconds, p.epochs_total
            ));
        }
        out
    }
}

struct CacheEntry {
    alpha: f64,
    models: Vec<LinearModel>,
}

/// k-fold cross-validated target accuracy as a function of alpha.
///
/// Folds split the target training rows only and are fixed for the lifetime
/// of the evaluator. Each fold trains on its target-train rows plus all source
/// rows; held-out target rows are masked out with zero weight.
pub struct AlphaEvaluator {
    target: Dataset,
    source_len: usize,
    combined: Dataset,
    folds: Vec<Fold>,
    validation_sets: Vec<Dataset>,
    cfg: TrainConfig,
    k: usize,
    warm_start: bool,
    cache: Vec<CacheEntry>,
    probes: Vec<Probe>,
}

impl AlphaEvaluator {
    /// Folds come from `kfold_indices(n_target, k, cfg.seed)`.
    pub fn new(target_train: &Dataset, source: &Dataset, k: usize, cfg: TrainConfig) -> Result<Self> {
        check_same_dim(target_train, source)?;
        cfg.validate()?;
        if source.is_empty() {
            return validation("source dataset is empty");
        }
        let folds = kfold_indices(target_train.n_rows(), k, cfg.seed)?;
        let validation_sets = folds.iter().map(|f| target_train.subset(&f.validation)).collect();
        Ok(Self {
            target: target_train.clone(),
            source_len: source.n_rows(),
            combined: target_train.concat(source)?,
            folds,
            validation_sets,
            cfg,
            k,
            warm_start: true,
            cache: Vec::new(),
            probes: Vec::new(),
        })
    }

    /// Disable to train every probe from zero.
    pub fn with_warm_start(mut self, on: bool) -> Self {
        self.warm_start = on;
        self
    }

    pub fn warm_start(&self) -> bool {
        self.warm_start
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn folds(&self) -> &[Fold] {
        &self.folds
    }

    pub fn target(&self) -> &Dataset {
        &self.target
    }

    /// The combined target-then-source rows, without the target rows.
    pub fn source(&self) -> Dataset {
        let n_t = self.target.n_rows();
        let idx: Vec<usize> = (n_t..n_t + self.source_len).collect();
        self.combined.subset(&idx)
    }

    /// Combined-row weights for fold `f`, with its validation rows zeroed.
    fn fold_weights(&self, fold: &Fold, alpha: f64) -> Result<Vec<f64>> {
        let (wt, ws) = row_weights(alpha, fold.train.len(), self.source_len)?;
        let n_t = self.target.n_rows();
        let mut w = vec![0.0; n_t + self.source_len];
        for &i in &fold.train {
            w[i] = wt;
        }
        w[n_t..].iter_mut().for_each(|x| *x = ws);
        Ok(w)
    }

    fn nearest(&self, alpha: f64) -> Option<&CacheEntry> {
        self.cache.iter().min_by(|a, b| {
            (a.alpha - alpha)
                .abs()
                .total_cmp(&(b.alpha - alpha).abs())
                .then(a.alpha.total_cmp(&b.alpha))
        })
    }

    /// Mean held-out accuracy over the folds. Cached per alpha.
    pub fn cv_accuracy(&mut self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        if let Some(v) = cached(&self.probes, alpha) {
            return Ok(v);
        }
        let start = Instant::now();
        let inits: Vec<Option<LinearModel>> = match (self.warm_start, self.nearest(alpha)) {
            (true, Some(entry)) => entry.models.iter().cloned().map(Some).collect(),
            _ => vec![None; self.k],
        };
        let weights = self
            .folds
            .iter()
            .map(|f| self.fold_weights(f, alpha))
            .collect::<Result<Vec<_>>>()?;
        let trained: Vec<(LinearModel, TrainStats)> = weights
            .par_iter()
            .zip(inits.par_iter())
            .map(|(w, init)| train_sgd(&self.combined, w, &self.cfg, init.as_ref()))
            .collect::<Result<_>>()?;
        let train_seconds = start.elapsed().as_secs_f64();

        let mut acc_sum = 0.0;
        for ((model, _), val) in trained.iter().zip(&self.validation_sets) {
            acc_sum += model.accuracy(val)?;
        }
        let accuracy = acc_sum / self.k as f64;
        let epochs_total = trained.iter().map(|(_, s)| s.epochs_run).sum();

        self.cache.push(CacheEntry {
            alpha,
            models: trained.into_iter().map(|(m, _)| m).collect(),
        });
        self.probes.push(Probe {
            alpha,
            accuracy,
            train_seconds,
            epochs_total,
        });
        Ok(accuracy)
    }

    /// Trains on all target-train rows plus the source at `alpha`, from zero.
    pub fn refit(&self, alpha: f64) -> Result<(LinearModel, TrainStats)> {
        let (wt, ws) = row_weights(alpha, self.target.n_rows(), self.source_len)?;
        let n_t = self.target.n_rows();
        let mut w = vec![wt; n_t];
        w.resize(n_t + self.source_len, ws);
        train_sgd(&self.combined, &w, &self.cfg, None)
    }

    fn report(
        &self,
        strategy: Strategy,
        delta: f64,
        alpha_star: f64,
        cv_accuracy: f64,
        bracket: Option<Bracket>,
        bracket_evaluations: usize,
        golden_iterations: usize,
    ) -> Result<SearchReport> {
        let start = Instant::now();
        let (final_model, stats) = self.refit(alpha_star)?;
        Ok(SearchReport {
            strategy,
            delta,
            k: self.k,
            warm_start: self.warm_start,
            probes: self.probes.clone(),
            alpha_star,
            cv_accuracy,
            bracket,
            bracket_evaluations,
            golden_iterations,
            search_seconds: self.probes.iter().map(|p| p.train_seconds).sum(),
            refit_seconds: start.elapsed().as_secs_f64(),
            refit_epochs: stats.epochs_run,
            final_model,
        })
    }
}

impl Objective for AlphaEvaluator {
    fn evaluate(&mut self, alpha: f64) -> Result<f64> {
        self.cv_accuracy(alpha)
    }

    fn probes(&self) -> &[Probe] {
        &self.probes
    }
}

/// Bracket + golden-section search for alpha, then a refit at the winner on
/// the full target training set plus source.
pub fn find_weighting(evaluator: &mut AlphaEvaluator, delta: f64) -> Result<(f64, SearchReport)> {
    let out = maximize(evaluator, delta)?;
    let report = evaluator.report(
        Strategy::Gss,
        delta,
        out.alpha,
        out.value,
        Some(out.bracket),
        out.bracket_evaluations,
        out.golden_iterations,
    )?;
    Ok((out.alpha, report))
}

pub fn grid_search(evaluator: &mut AlphaEvaluator, delta: f64) -> Result<(f64, SearchReport)> {
    let (alpha, value) = grid_maximize(evaluator, delta)?;
    let report = evaluator.report(Strategy::Grid, delta, alpha, value, None, 0, 0)?;
    Ok((alpha, report))
}

pub fn random_search(evaluator: &mut AlphaEvaluator, n_probes: usize, seed: u64) -> Result<(f64, SearchReport)> {
    let (alpha, value) = random_maximize(evaluator, n_probes, seed)?;
    let report = evaluator.report(Strategy::Random, f64::NAN, alpha, value, None, 0, 0)?;
    Ok((alpha, report))
}

/// Runs `strategy` with its standard settings (`delta` for gss/grid,
/// `n_random` probes for random).
pub fn run_strategy(
    evaluator: &mut AlphaEvaluator,
    strategy: Strategy,
    delta: f64,
    n_random: usize,
    seed: u64,
) -> Result<(f64, SearchReport)> {
    match strategy {
        Strategy::Gss => find_weighting(evaluator, delta),
        Strategy::Grid => grid_search(evaluator, delta),
        Strategy::Random => random_search(evaluator, n_random, seed),
    }
}
