//! Datasets: loading, synthetic generation, splits, downsampling and folds.
//!
//! Every randomized operation takes an explicit seed and is bit-reproducible
//! given its inputs.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// Dense row-major feature matrix with binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<u8>,
    n_cols: usize,
    feature_names: Option<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from row-major `features` with `n_cols` columns.
    pub fn new(features: Vec<f64>, n_cols: usize, labels: Vec<u8>) -> Result<Self> {
        if n_cols == 0 {
            return validation("dataset needs at least one feature column");
        }
        if features.len() != labels.len() * n_cols {
            return validation(format!(
                "feature matrix has {} values, expected {} rows x {} columns",
                features.len(),
                labels.len(),
                n_cols
            ));
        }
        if let Some(pos) = labels.iter().position(|&y| y > 1) {
            return validation(format!("label at row {pos} is {}, expected 0 or 1", labels[pos]));
        }
        Ok(Self {
            features,
            labels,
            n_cols,
            feature_names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>) -> Result<Self> {
        let n_cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != n_cols) {
            return validation("rows have differing lengths");
        }
        Self::new(rows.concat(), n_cols, labels)
    }

    /// A dataset with zero rows and `n_cols` columns.
    pub fn empty(n_cols: usize) -> Self {
        Self {
            features: Vec::new(),
            labels: Vec::new(),
            n_cols,
            feature_names: None,
        }
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_cols {
            return validation(format!(
                "{} feature names for {} columns",
                names.len(),
                self.n_cols
            ));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact would yield nothing useful for n_cols == 0, which `new` rejects
        self.features.chunks_exact(self.n_cols)
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_cols);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            n_cols: self.n_cols,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        check_same_dim(self, other)?;
        let mut features = Vec::with_capacity(self.features.len() + other.features.len());
        features.extend_from_slice(&self.features);
        features.extend_from_slice(&other.features);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(Dataset {
            features,
            labels,
            n_cols: self.n_cols,
            feature_names: self.feature_names.clone(),
        })
    }

    /// Same rows with every feature row passed through `f`, which must
    /// produce rows of `new_cols` values.
    pub fn map_rows(&self, new_cols: usize, mut f: impl FnMut(&[f64], &mut Vec<f64>)) -> Dataset {
        let mut features = Vec::with_capacity(self.n_rows() * new_cols);
        for row in self.rows() {
            f(row, &mut features);
        }
        assert_eq!(features.len(), self.n_rows() * new_cols, "row map produced wrong width");
        Dataset {
            features,
            labels: self.labels.clone(),
            n_cols: new_cols,
            feature_names: None,
        }
    }

    /// Same features with new labels.
    pub fn relabel(&self, labels: Vec<u8>) -> Result<Dataset> {
        if labels.len() != self.n_rows() {
            return validation("label count does not match row count");
        }
        let mut ds = Dataset::new(self.features.clone(), self.n_cols, labels)?;
        ds.feature_names = self.feature_names.clone();
        Ok(ds)
    }

    pub fn positive_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&y| y == 1).count() as f64 / self.n_rows() as f64
    }
}

pub(crate) fn check_same_dim(a: &Dataset, b: &Dataset) -> Result<()> {
    if a.n_cols() != b.n_cols() {
        return validation(format!(
            "dimension mismatch: {} vs {} columns",
            a.n_cols(),
            b.n_cols()
        ));
    }
    Ok(())
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Synthetic label-shift benchmark: shared Gaussian covariates, target labels
/// from `sum_j x_j`, source labels from `sum_j c_j x_j` with `c_j ~ N(1, sigma)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_target: usize,
    pub n_source: usize,
    pub d: usize,
    pub sigma: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_target: 10_000,
            n_source: 20_000,
            d: 500,
            sigma: 2.0,
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.n_target < 1 {
            return bad("n_target must be at least 1");
        }
        if self.n_source < 1 {
            return bad("n_source must be at least 1");
        }
        if self.d < 1 {
            return bad("d must be at least 1");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be finite and non-negative");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be finite and non-negative");
        }
        Ok(())
    }
}

/// The source labeling weights `c_j` a config would draw.
pub fn source_label_weights(cfg: &SyntheticConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, 1);
    draw_source_weights(cfg, &mut rng)
}

fn draw_source_weights(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let normal = Normal::new(1.0, cfg.sigma).map_err(|e| Error::Config(e.to_string()))?;
    Ok((0..cfg.d).map(|_| normal.sample(rng)).collect())
}

/// Generates `(target, source)`.
///
/// Target rows come from their own random stream, so the target sample does
/// not depend on `sigma` or `n_source`.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;

    let mut target_rng = rng_for(cfg.seed, 0);
    let target = sample_labeled(cfg.n_target, cfg.d, cfg.noise_sd, None, &mut target_rng)?;

    let mut source_rng = rng_for(cfg.seed, 1);
    let weights = draw_source_weights(cfg, &mut source_rng)?;
    let source = sample_labeled(cfg.n_source, cfg.d, cfg.noise_sd, Some(&weights), &mut source_rng)?;

    Ok((target, source))
}

fn sample_labeled(
    n: usize,
    d: usize,
    noise_sd: f64,
    weights: Option<&[f64]>,
    rng: &mut ChaCha8Rng,
) -> Result<Dataset> {
    let mut features = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let start = features.len();
        features.extend((0..d).map(|_| -> f64 { StandardNormal.sample(rng) }));
        let row: &[f64] = &features[start..];
        let signal: f64 = match weights {
            Some(c) => row.iter().zip(c).map(|(x, c)| c * x).sum(),
            None => row.iter().sum(),
        };
        let z: f64 = StandardNormal.sample(rng);
        labels.push(u8::from(signal + noise_sd * z > 0.0));
    }
    Dataset::new(features, d, labels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableFormat {
    Csv,
    /// `label idx:val ...` rows with 1-based indices and a `#d=<int>` header.
    Sparse,
}

fn parse_label(raw: &str, line: usize) -> Result<u8> {
    let value: f64 = raw.trim().parse().map_err(|_| Error::Format {
        line,
        message: format!("label {raw:?} is not numeric"),
    })?;
    if value == 1.0 {
        Ok(1)
    } else if value == 0.0 || value == -1.0 {
        Ok(0)
    } else {
        validation(format!("line {line}: label {raw} is not in {{0,1}} or {{-1,+1}}"))
    }
}

/// Loads a labeled table. For CSV the header names the columns and
/// `label_column` selects the label; for sparse files the label leads each row.
pub fn load_table(path: &Path, format: TableFormat, label_column: &str) -> Result<Dataset> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    match format {
        TableFormat::Csv => parse_csv(&text, label_column),
        TableFormat::Sparse => parse_sparse(&text),
    }
}

pub fn parse_csv(text: &str, label_column: &str) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Format {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(Error::Format {
            line: 1,
            message: "missing header row".into(),
        });
    }
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Format {
            line: 1,
            message: format!("label column {label_column:?} not in header"),
        })?;
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_idx)
        .map(|(_, h)| h.to_string())
        .collect();
    if names.is_empty() {
        return Err(Error::Format {
            line: 1,
            message: "no feature columns".into(),
        });
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Format {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != headers.len() {
            return Err(Error::Format {
                line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (i, field) in record.iter().enumerate() {
            if i == label_idx {
                labels.push(parse_label(field, line)?);
            } else {
                features.push(field.parse::<f64>().map_err(|_| Error::Format {
                    line,
                    message: format!("value {field:?} is not numeric"),
                })?);
            }
        }
    }
    Dataset::new(features, names.len(), labels)?.with_feature_names(names)
}

pub fn parse_sparse(text: &str) -> Result<Dataset> {
    let mut declared: Option<usize> = None;
    let mut entries: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some(d) = rest.trim().strip_prefix("d=") {
                declared = Some(d.trim().parse().map_err(|_| Error::Format {
                    line,
                    message: format!("bad dimension header {trimmed:?}"),
                })?);
            }
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let label = tokens.next().expect("non-empty line has a token");
        labels.push(parse_label(label, line)?);
        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| Error::Format {
                line,
                message: format!("expected idx:val, found {tok:?}"),
            })?;
            let idx: usize = idx.parse().map_err(|_| Error::Format {
                line,
                message: format!("bad index {idx:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Format {
                    line,
                    message: "indices are 1-based".into(),
                });
            }
            let val: f64 = val.parse().map_err(|_| Error::Format {
                line,
                message: format!("bad value {val:?}"),
            })?;
            max_index = max_index.max(idx);
            row.push((idx - 1, val));
        }
        entries.push(row);
    }

    if labels.is_empty() {
        return Err(Error::Format {
            line: 1,
            message: "no data rows".into(),
        });
    }
    let d = declared.unwrap_or(max_index);
    if max_index > d {
        return validation(format!("feature index {max_index} exceeds declared d={d}"));
    }
    let mut features = vec![0.0; labels.len() * d];
    for (r, row) in entries.iter().enumerate() {
        for &(c, v) in row {
            features[r * d + c] = v;
        }
    }
    Dataset::new(features, d, labels)
}

/// Random disjoint split; the test part has `round(test_fraction * n)` rows.
/// Both parts keep the input's relative row order.
pub fn split_train_test(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = ds.n_rows();
    if n < 2 {
        return validation(format!("cannot split {n} rows"));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return validation(format!("test fraction {test_fraction} not in (0,1)"));
    }
    let n_test = (test_fraction * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return validation(format!(
            "test fraction {test_fraction} of {n} rows leaves an empty partition"
        ));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, 0));
    let (test, train) = idx.split_at_mut(n_test);
    test.sort_unstable();
    train.sort_unstable();
    Ok((ds.subset(train), ds.subset(test)))
}

/// Uniform sample of `n` rows without replacement, in sampled order.
pub fn downsample(ds: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n > ds.n_rows() {
        return validation(format!("cannot downsample {} rows to {n}", ds.n_rows()));
    }
    let mut idx: Vec<usize> = (0..ds.n_rows()).collect();
    let (chosen, _) = idx.partial_shuffle(&mut rng_for(seed, 0), n);
    Ok(ds.subset(chosen))
}

/// One cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

pub const DEFAULT_FOLDS: usize = 5;

/// Shuffled k-fold partition of `0..n`. The first `n % k` folds get one
/// extra validation index. Index lists are sorted.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 || k > n {
        return validation(format!("need 2 <= k <= n, got k={k}, n={n}"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, 0));

    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut validation = idx[start..start + size].to_vec();
        validation.sort_unstable();
        let mut train: Vec<usize> = idx[..start].iter().chain(&idx[start + size..]).copied().collect();
        train.sort_unstable();
        folds.push(Fold { train, validation });
        start += size;
    }
    Ok(folds)
}

/// Per-column z-scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fits column means and standard deviations over the rows of all `parts`.
    /// Constant columns get scale 1.
    pub fn fit(parts: &[&Dataset]) -> Result<Self> {
        let d = parts.first().map(|p| p.n_cols()).unwrap_or(0);
        if d == 0 {
            return validation("nothing to standardize");
        }
        for p in parts {
            if p.n_cols() != d {
                return validation("dimension mismatch across datasets");
            }
        }
        let n: usize = parts.iter().map(|p| p.n_rows()).sum();
        if n == 0 {
            return validation("cannot standardize zero rows");
        }
        let mut mean = vec![0.0; d];
        for row in parts.iter().flat_map(|p| p.rows()) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for row in parts.iter().flat_map(|p| p.rows()) {
            for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.n_cols() != self.mean.len() {
            return validation("dimension mismatch with fitted standardizer");
        }
        let mut out = ds.map_rows(ds.n_cols(), |row, out| {
            out.extend(
                row.iter()
                    .zip(&self.mean)
                    .zip(&self.scale)
                    .map(|((x, m), s)| (x - m) / s),
            )
        });
        out.feature_names = ds.feature_names.clone();
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small(n: usize) -> Dataset {
        let features = (0..n * 2).map(|v| v as f64).collect();
        let labels = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::new(features, 2, labels).unwrap()
    }

    #[test]
    fn rejects_bad_labels_and_shapes() {
        assert!(Dataset::new(vec![1.0, 2.0], 2, vec![2]).is_err());
        assert!(Dataset::new(vec![1.0, 2.0, 3.0], 2, vec![1]).is_err());
    }

    #[test]
    fn sigma_zero_gives_unit_source_weights() {
        let cfg = SyntheticConfig {
            n_target: 20,
            n_source: 20,
            d: 7,
            sigma: 0.0,
            noise_sd: 1.0,
            seed: 3,
        };
        assert!(source_label_weights(&cfg).unwrap().iter().all(|&c| c == 1.0));
    }

    #[test]
    fn synthetic_dimensions() {
        let cfg = SyntheticConfig {
            n_target: 10,
            n_source: 12,
            d: 500,
            ..Default::default()
        };
        let (t, s) = generate_synthetic(&cfg).unwrap();
        assert_eq!((t.n_rows(), t.n_cols()), (10, 500));
        assert_eq!((s.n_rows(), s.n_cols()), (12, 500));
    }

    #[test]
    fn synthetic_labels_are_balanced() {
        let cfg = SyntheticConfig {
            n_target: 10_000,
            n_source: 1,
            d: 50,
            sigma: 0.0,
            noise_sd: 0.0,
            seed: 11,
        };
        let (t, _) = generate_synthetic(&cfg).unwrap();
        let frac = t.positive_fraction();
        assert!((0.47..=0.53).contains(&frac), "{frac}");
    }

    #[test]
    fn noiseless_identical_labeling_functions() {
        let cfg = SyntheticConfig {
            n_target: 300,
            n_source: 300,
            d: 9,
            sigma: 0.0,
            noise_sd: 0.0,
            seed: 5,
        };
        let (t, s) = generate_synthetic(&cfg).unwrap();
        for ds in [&t, &s] {
            for (row, &y) in ds.rows().zip(ds.labels()) {
                assert_eq!(y, u8::from(row.iter().sum::<f64>() > 0.0));
            }
        }
    }

    #[test]
    fn target_stream_independent_of_source_settings() {
        let a = SyntheticConfig {
            n_target: 50,
            n_source: 10,
            d: 4,
            sigma: 0.5,
            noise_sd: 1.0,
            seed: 9,
        };
        let b = SyntheticConfig {
            n_source: 99,
            sigma: 8.0,
            ..a.clone()
        };
        assert_eq!(generate_synthetic(&a).unwrap().0, generate_synthetic(&b).unwrap().0);
    }

    #[test]
    fn invalid_synthetic_config() {
        let cfg = SyntheticConfig {
            d: 0,
            ..Default::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
        let cfg = SyntheticConfig {
            sigma: -1.0,
            ..Default::default()
        };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn csv_read_back() {
        let ds = parse_csv("a,b,y\n1,2,0\n3,4,1\n5,6,1\n", "y").unwrap();
        assert_eq!((ds.n_rows(), ds.n_cols()), (3, 2));
        assert_eq!(ds.labels(), &[0, 1, 1]);
        assert_eq!(ds.row(1), &[3.0, 4.0]);
        assert_eq!(ds.feature_names().unwrap(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn csv_plus_minus_one_labels() {
        let ds = parse_csv("y,a\n-1,0.5\n+1,1.5\n", "y").unwrap();
        assert_eq!(ds.labels(), &[0, 1]);
        assert_eq!(ds.row(0), &[0.5]);
    }

    #[test]
    fn csv_errors() {
        assert!(matches!(parse_csv("", "y"), Err(Error::Format { .. })));
        match parse_csv("a,y\n1,0\nx,1\n", "y") {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_csv("a,y\n1,2\n", "y"), Err(Error::Validation(_))));
        assert!(matches!(parse_csv("a,b\n1,2\n", "y"), Err(Error::Format { .. })));
    }

    #[test]
    fn sparse_row_to_dense() {
        let ds = parse_sparse("#d=10\n1 3:0.5 7:1.2\n").unwrap();
        assert_eq!(ds.n_cols(), 10);
        let mut expected = vec![0.0; 10];
        expected[2] = 0.5;
        expected[6] = 1.2;
        assert_eq!(ds.row(0), expected.as_slice());
        assert_eq!(ds.labels(), &[1]);
    }

    #[test]
    fn sparse_errors() {
        assert!(matches!(parse_sparse(""), Err(Error::Format { .. })));
        assert!(matches!(parse_sparse("#d=2\n1 0:1\n"), Err(Error::Format { line: 2, .. })));
        assert!(parse_sparse("#d=2\n1 3:1\n").is_err());
        assert!(matches!(parse_sparse("#d=2\n1 1:abc\n"), Err(Error::Format { line: 2, .. })));
    }

    #[test]
    fn split_sizes() {
        let (tr, te) = split_train_test(&small(100), 0.2, 1).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (80, 20));
        let (tr, te) = split_train_test(&small(5), 0.2, 1).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (4, 1));
        assert!(split_train_test(&small(1), 0.2, 1).is_err());
    }

    #[test]
    fn split_is_deterministic() {
        let ds = small(50);
        assert_eq!(split_train_test(&ds, 0.3, 4).unwrap(), split_train_test(&ds, 0.3, 4).unwrap());
    }

    #[test]
    fn downsample_cases() {
        let ds = small(40);
        let full = downsample(&ds, 40, 2).unwrap();
        let mut a: Vec<_> = full.rows().map(|r| r[0] as i64).collect();
        a.sort_unstable();
        assert_eq!(a, (0..40).map(|i| 2 * i).collect::<Vec<_>>());

        let big = small(4000);
        let part = downsample(&big, 500, 8).unwrap();
        assert_eq!(part.n_rows(), 500);
        assert!(part.rows().all(|r| r[0] as usize % 2 == 0 && (r[0] as usize) < 8000));

        let none = downsample(&ds, 0, 1).unwrap();
        assert_eq!((none.n_rows(), none.n_cols()), (0, 2));
        assert!(downsample(&ds, 41, 1).is_err());
    }

    #[test]
    fn kfold_sizes() {
        let folds = kfold_indices(10, 5, 0).unwrap();
        assert!(folds.iter().all(|f| f.validation.len() == 2 && f.train.len() == 8));
        let sizes: Vec<_> = kfold_indices(7, 5, 0)
            .unwrap()
            .iter()
            .map(|f| f.validation.len())
            .collect();
        assert_eq!(sizes, vec![2, 2, 1, 1, 1]);
        assert!(kfold_indices(4, 5, 0).is_err());
        assert!(kfold_indices(4, 1, 0).is_err());
        assert_eq!(DEFAULT_FOLDS, 5);
    }

    #[test]
    fn standardizer_zero_mean_unit_scale() {
        let ds = small(10);
        let st = Standardizer::fit(&[&ds]).unwrap();
        let z = st.apply(&ds).unwrap();
        for c in 0..2 {
            let col: Vec<f64> = z.rows().map(|r| r[c]).collect();
            let mean = col.iter().sum::<f64>() / 10.0;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 10.0;
            assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn split_partitions_input(n in 2usize..200, frac in 0.05f64..0.95, seed: u64) {
            let ds = small(n);
            let n_test = (frac * n as f64).round() as usize;
            prop_assume!(n_test > 0 && n_test < n);
            let (tr, te) = split_train_test(&ds, frac, seed).unwrap();
            let mut ids: Vec<i64> = tr.rows().chain(te.rows()).map(|r| r[0] as i64).collect();
            ids.sort_unstable();
            prop_assert_eq!(ids, (0..n as i64).map(|i| 2 * i).collect::<Vec<_>>());
            prop_assert_eq!(te.n_rows(), n_test);
        }

        #[test]
        fn kfold_partitions_indices(n in 2usize..300, k in 2usize..12, seed: u64) {
            prop_assume!(k <= n);
            let folds = kfold_indices(n, k, seed).unwrap();
            let mut seen = vec![0u32; n];
            for f in &folds {
                for &i in &f.validation { seen[i] += 1; }
                prop_assert_eq!(f.train.len() + f.validation.len(), n);
                prop_assert!(f.train.iter().all(|i| f.validation.binary_search(i).is_err()));
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
            let max = folds.iter().map(|f| f.validation.len()).max().unwrap();
            let min = folds.iter().map(|f| f.validation.len()).min().unwrap();
            prop_assert!(max - min <= 1);
            prop_assert_eq!(folds, kfold_indices(n, k, seed).unwrap());
        }
    }
}
