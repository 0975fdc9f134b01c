//! Regression of parser performance on treebank size and leakage.
//!
//! The model is `performance = alpha * size + beta * leakage + gamma`,
//! fitted by least squares via Householder QR (numerically stable when
//! sizes span orders of magnitude; the normal equations are used only as an
//! independent test oracle). Diagnostics follow the evaluation protocol:
//! in-sample R², k-fold cross-validated explained variance and MAE over
//! pooled held-out predictions, and Spearman's rank correlation between
//! leakage and performance.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{rng_from_seed, shuffled_indices};

/// One treebank experiment: training-set size, leakage factor, and the
/// externally measured parser score (never computed here).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub treebank_id: String,
    /// Training treebank size; sentences or tokens, as the manifest chose.
    #[serde(rename = "size")]
    pub size_ts: f64,
    /// Leakage fraction in [0, 1].
    #[serde(rename = "leakage")]
    pub leakage_phi: f64,
    /// Parser score, e.g. LAS points.
    #[serde(rename = "score")]
    pub performance: f64,
}

/// Entries for one leakage column of a manifest. A manifest with a single
/// `leakage` column yields one series; one with several `leakage*` columns
/// (say `leakage_tree_none`) yields one series per column.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestSeries {
    pub leakage_column: String,
    pub entries: Vec<ManifestEntry>,
}

/// Fitted coefficients plus the cross-validation and rank diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// In-sample R² of the full-data fit.
    pub regression_score: f64,
    /// 1 − Var(residual)/Var(target) over pooled held-out predictions;
    /// negative when the model predicts worse than the target mean.
    pub explained_variance_cv: f64,
    /// Mean absolute error of pooled held-out predictions, in score points.
    pub mae_cv: f64,
    /// Spearman correlation between leakage and performance.
    pub spearman_rho: f64,
    pub k: usize,
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {minimum} entries, got {found}")]
    TooFewEntries { found: usize, minimum: usize },
    #[error("design matrix is rank deficient; collinear columns: {}", columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("fold count k={k} invalid for {n} entries (need 2 <= k <= n)")]
    BadFoldCount { k: usize, n: usize },
    #[error("fold assignment must cover each entry index exactly once")]
    BadFoldAssignment,
    #[error("spearman inputs differ in length: {xs} vs {ys}")]
    LengthMismatch { xs: usize, ys: usize },
    #[error("constant input on the {side} side: rank variance is zero")]
    ConstantInput { side: &'static str },
    #[error("non-finite value on the {side} side")]
    NonFiniteInput { side: &'static str },
    #[error("target (performance) values are constant; variance-based scores undefined")]
    ConstantTarget,
}

#[derive(Debug, Error, PartialEq)]
pub enum ManifestError {
    #[error("line {line}: expected {expected} tab-separated fields, found {found}")]
    FieldCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("manifest header is missing required column {0:?}")]
    MissingColumn(&'static str),
    #[error(
        "manifest has no leakage column (a column named \"leakage\" or starting with \"leakage\")"
    )]
    NoLeakageColumn,
    #[error("manifest is empty (no header line)")]
    MissingHeader,
    #[error("line {line}, column {column:?}: cannot parse {value:?} as a number")]
    InvalidNumber {
        line: usize,
        column: String,
        value: String,
    },
    #[error("line {line}, column {column:?}: leakage {value} outside [0, 1]")]
    LeakageOutOfRange {
        line: usize,
        column: String,
        value: f64,
    },
    #[error("line {line}, column {column:?}: value {value} must be finite and non-negative")]
    BadSize {
        line: usize,
        column: String,
        value: f64,
    },
    #[error("line {line}, column {column:?}: score {value} is not finite")]
    BadScore {
        line: usize,
        column: String,
        value: f64,
    },
    #[error("manifest JSON: {0}")]
    Json(String),
}

// ---------------------------------------------------------------------------
// Manifest loading
// ---------------------------------------------------------------------------

/// Parse a manifest, auto-detecting JSON (leading '[') versus TSV.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestSeries>, ManifestError> {
    if text.trim_start().starts_with('[') {
        parse_manifest_json(text)
    } else {
        parse_manifest_tsv(text)
    }
}

/// TSV manifest: '#' comment lines, a header naming `treebank_id`, `size`,
/// `score`, and one or more `leakage*` columns, then one row per treebank.
/// Unrecognized columns are ignored. Returns one series per leakage column,
/// in header order.
pub fn parse_manifest_tsv(text: &str) -> Result<Vec<ManifestSeries>, ManifestError> {
    let mut rows = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));

    let (_, header) = rows.next().ok_or(ManifestError::MissingHeader)?;
    let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
    let position = |name: &'static str| {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or(ManifestError::MissingColumn(name))
    };
    let id_col = position("treebank_id")?;
    let size_col = position("size")?;
    let score_col = position("score")?;
    let leakage_cols: Vec<(usize, String)> = columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.starts_with("leakage"))
        .map(|(i, c)| (i, c.to_string()))
        .collect();
    if leakage_cols.is_empty() {
        return Err(ManifestError::NoLeakageColumn);
    }

    let mut series: Vec<ManifestSeries> = leakage_cols
        .iter()
        .map(|(_, name)| ManifestSeries {
            leakage_column: name.clone(),
            entries: Vec::new(),
        })
        .collect();

    for (line, row) in rows {
        let fields: Vec<&str> = row.split('\t').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(ManifestError::FieldCount {
                line,
                expected: columns.len(),
                found: fields.len(),
            });
        }
        let number = |col: usize| -> Result<f64, ManifestError> {
            fields[col]
                .parse::<f64>()
                .map_err(|_| ManifestError::InvalidNumber {
                    line,
                    column: columns[col].to_string(),
                    value: fields[col].to_string(),
                })
        };
        let size = number(size_col)?;
        if !size.is_finite() || size < 0.0 {
            return Err(ManifestError::BadSize {
                line,
                column: "size".into(),
                value: size,
            });
        }
        let score = number(score_col)?;
        if !score.is_finite() {
            return Err(ManifestError::BadScore {
                line,
                column: "score".into(),
                value: score,
            });
        }
        for ((col, name), series) in leakage_cols.iter().zip(&mut series) {
            let leakage = number(*col)?;
            if !(0.0..=1.0).contains(&leakage) {
                return Err(ManifestError::LeakageOutOfRange {
                    line,
                    column: name.clone(),
                    value: leakage,
                });
            }
            series.entries.push(ManifestEntry {
                treebank_id: fields[id_col].to_string(),
                size_ts: size,
                leakage_phi: leakage,
                performance: score,
            });
        }
    }
    Ok(series)
}

/// JSON manifest: an array of objects with keys `treebank_id`, `size`,
/// `score`, and one or more `leakage*` keys (the same set in every object).
/// Series are returned in sorted key order.
pub fn parse_manifest_json(text: &str) -> Result<Vec<ManifestSeries>, ManifestError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ManifestError::Json(e.to_string()))?;
    let array = value
        .as_array()
        .ok_or_else(|| ManifestError::Json("expected a top-level array".into()))?;

    let object = |i: usize| -> Result<&serde_json::Map<String, serde_json::Value>, ManifestError> {
        array[i]
            .as_object()
            .ok_or_else(|| ManifestError::Json(format!("entry {i} is not an object")))
    };
    let mut leakage_keys: Vec<String> = Vec::new();
    if let Some(first) = array.first() {
        let obj = first
            .as_object()
            .ok_or_else(|| ManifestError::Json("entry 0 is not an object".into()))?;
        leakage_keys = obj
            .keys()
            .filter(|k| k.starts_with("leakage"))
            .cloned()
            .collect();
        leakage_keys.sort();
        if leakage_keys.is_empty() {
            return Err(ManifestError::NoLeakageColumn);
        }
    }

    let mut series: Vec<ManifestSeries> = leakage_keys
        .iter()
        .map(|name| ManifestSeries {
            leakage_column: name.clone(),
            entries: Vec::new(),
        })
        .collect();

    for i in 0..array.len() {
        let obj = object(i)?;
        let get = |key: &str| -> Result<&serde_json::Value, ManifestError> {
            obj.get(key)
                .ok_or_else(|| ManifestError::Json(format!("entry {i} is missing key {key:?}")))
        };
        let number = |key: &str| -> Result<f64, ManifestError> {
            get(key)?.as_f64().ok_or_else(|| {
                ManifestError::Json(format!("entry {i}: key {key:?} is not a number"))
            })
        };
        let treebank_id = get("treebank_id")?
            .as_str()
            .ok_or_else(|| ManifestError::Json(format!("entry {i}: treebank_id is not a string")))?
            .to_string();
        let size = number("size")?;
        if !size.is_finite() || size < 0.0 {
            return Err(ManifestError::BadSize {
                line: i + 1,
                column: "size".into(),
                value: size,
            });
        }
        let score = number("score")?;
        if !score.is_finite() {
            return Err(ManifestError::BadScore {
                line: i + 1,
                column: "score".into(),
                value: score,
            });
        }
        for (key, series) in leakage_keys.iter().zip(&mut series) {
            let leakage = number(key)?;
            if !(0.0..=1.0).contains(&leakage) {
                return Err(ManifestError::LeakageOutOfRange {
                    line: i + 1,
                    column: key.clone(),
                    value: leakage,
                });
            }
            series.entries.push(ManifestEntry {
                treebank_id: treebank_id.clone(),
                size_ts: size,
                leakage_phi: leakage,
                performance: score,
            });
        }
    }
    Ok(series)
}

// ---------------------------------------------------------------------------
// Ordinary least squares
// ---------------------------------------------------------------------------

/// Numerical options for the OLS solve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OlsOptions {
    /// Z-score the size and leakage columns before solving, then transform
    /// the coefficients back. Results are unchanged up to rounding; useful
    /// when sizes span many orders of magnitude.
    pub standardize: bool,
}

const COLUMN_NAMES: [&str; 3] = ["size", "leakage", "intercept"];

/// Least-squares fit of `performance = alpha*size + beta*leakage + gamma`.
pub fn ols_fit(entries: &[ManifestEntry]) -> Result<(f64, f64, f64), StatsError> {
    ols_fit_with(entries, OlsOptions::default())
}

/// [`ols_fit`] with explicit numerical options.
pub fn ols_fit_with(
    entries: &[ManifestEntry],
    options: OlsOptions,
) -> Result<(f64, f64, f64), StatsError> {
    if entries.len() < 3 {
        return Err(StatsError::TooFewEntries {
            found: entries.len(),
            minimum: 3,
        });
    }

    // A constant predictor column duplicates the intercept; name the pair
    // instead of letting the factorization report a bare near-zero pivot.
    let mut collinear: Vec<String> = Vec::new();
    let constant = |get: fn(&ManifestEntry) -> f64| {
        let first = get(&entries[0]);
        entries.iter().all(|e| get(e) == first)
    };
    if constant(|e| e.size_ts) {
        collinear.push("size".into());
    }
    if constant(|e| e.leakage_phi) {
        collinear.push("leakage".into());
    }
    if !collinear.is_empty() {
        collinear.push("intercept".into());
        return Err(StatsError::RankDeficient { columns: collinear });
    }

    let (mut shift, mut scale) = ([0.0f64; 2], [1.0f64; 2]);
    if options.standardize {
        let columns: [Vec<f64>; 2] = [
            entries.iter().map(|e| e.size_ts).collect(),
            entries.iter().map(|e| e.leakage_phi).collect(),
        ];
        for (c, values) in columns.iter().enumerate() {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
            shift[c] = mean;
            scale[c] = var.sqrt(); // nonzero: constant columns rejected above
        }
    }

    let rows: Vec<[f64; 3]> = entries
        .iter()
        .map(|e| {
            [
                (e.size_ts - shift[0]) / scale[0],
                (e.leakage_phi - shift[1]) / scale[1],
                1.0,
            ]
        })
        .collect();
    let targets: Vec<f64> = entries.iter().map(|e| e.performance).collect();
    let [a, b, g] = qr_solve(rows, targets)?;

    // Undo the standardization so coefficients are in original units.
    let alpha = a / scale[0];
    let beta = b / scale[1];
    let gamma = g - alpha * shift[0] - beta * shift[1];
    Ok((alpha, beta, gamma))
}

/// Solve min ‖rows·x − targets‖₂ by Householder QR, consuming the inputs.
fn qr_solve(mut a: Vec<[f64; 3]>, mut b: Vec<f64>) -> Result<[f64; 3], StatsError> {
    let n = a.len();
    let col_norms: [f64; 3] = {
        let mut norms = [0.0f64; 3];
        for row in &a {
            for (c, norm) in norms.iter_mut().enumerate() {
                *norm += row[c] * row[c];
            }
        }
        norms.map(f64::sqrt)
    };

    let mut v = vec![0.0f64; n];
    for j in 0..3 {
        let norm = a[j..].iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue; // pivot stays 0; caught by the rank check below
        }
        let pivot = if a[j][j] >= 0.0 { -norm } else { norm };
        v[j] = a[j][j] - pivot;
        for i in j + 1..n {
            v[i] = a[i][j];
        }
        let vtv: f64 = v[j..].iter().map(|x| x * x).sum();
        if vtv > 0.0 {
            // Column sweep over row-major storage; no iterator form is clearer.
            #[allow(clippy::needless_range_loop)]
            for c in j + 1..3 {
                let dot: f64 = (j..n).map(|i| v[i] * a[i][c]).sum();
                let f = 2.0 * dot / vtv;
                for i in j..n {
                    a[i][c] -= f * v[i];
                }
            }
            let dot: f64 = (j..n).map(|i| v[i] * b[i]).sum();
            let f = 2.0 * dot / vtv;
            for i in j..n {
                b[i] -= f * v[i];
            }
        }
        a[j][j] = pivot;
        for row in a.iter_mut().skip(j + 1) {
            row[j] = 0.0;
        }
    }

    let deficient: Vec<String> = (0..3)
        .filter(|&j| a[j][j].abs() <= 1e-10 * col_norms[j].max(f64::MIN_POSITIVE))
        .map(|j| COLUMN_NAMES[j].to_string())
        .collect();
    if !deficient.is_empty() {
        return Err(StatsError::RankDeficient { columns: deficient });
    }

    let mut x = [0.0f64; 3];
    for j in (0..3).rev() {
        let mut s = b[j];
        for c in j + 1..3 {
            s -= a[j][c] * x[c];
        }
        x[j] = s / a[j][j];
    }
    Ok(x)
}

fn predict(coefs: (f64, f64, f64), e: &ManifestEntry) -> f64 {
    coefs.0 * e.size_ts + coefs.1 * e.leakage_phi + coefs.2
}

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

/// The seed-derived fold rule, exposed so external oracles can replay it.
///
/// Indices `0..n` are shuffled by one Fisher-Yates pass driven by ChaCha8
/// seeded with `seed` (rejection-sampled bounded draws, no modulo bias);
/// the shuffled sequence is cut into `k` consecutive chunks, the first
/// `n mod k` of size `ceil(n/k)` and the rest of size `floor(n/k)`. Fold
/// `f` is the f-th chunk. Panics if `k` is 0 or exceeds `n`.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    assert!(k >= 1 && k <= n, "fold count {k} invalid for {n} entries");
    let order = shuffled_indices(&mut rng_from_seed(seed), n);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(order[start..start + len].to_vec());
        start += len;
    }
    folds
}

/// K-fold cross-validation with the [`fold_assignment`] rule; returns
/// (explained variance, MAE) over pooled held-out predictions.
pub fn kfold_cv(entries: &[ManifestEntry], k: usize, seed: u64) -> Result<(f64, f64), StatsError> {
    kfold_cv_with(entries, k, seed, OlsOptions::default())
}

/// [`kfold_cv`] with explicit numerical options for the per-fold fits.
pub fn kfold_cv_with(
    entries: &[ManifestEntry],
    k: usize,
    seed: u64,
    options: OlsOptions,
) -> Result<(f64, f64), StatsError> {
    let n = entries.len();
    if k < 2 || k > n {
        return Err(StatsError::BadFoldCount { k, n });
    }
    kfold_cv_assigned_with(entries, &fold_assignment(n, k, seed), options)
}

/// Cross-validate with an explicit fold partition (each index exactly
/// once). Results depend only on which entries share a fold, not on entry
/// storage order — the property that makes seeded runs reproducible.
pub fn kfold_cv_assigned(
    entries: &[ManifestEntry],
    folds: &[Vec<usize>],
) -> Result<(f64, f64), StatsError> {
    kfold_cv_assigned_with(entries, folds, OlsOptions::default())
}

/// [`kfold_cv_assigned`] with explicit numerical options.
pub fn kfold_cv_assigned_with(
    entries: &[ManifestEntry],
    folds: &[Vec<usize>],
    options: OlsOptions,
) -> Result<(f64, f64), StatsError> {
    let n = entries.len();
    let mut seen = vec![false; n];
    for &i in folds.iter().flatten() {
        if i >= n || seen[i] {
            return Err(StatsError::BadFoldAssignment);
        }
        seen[i] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(StatsError::BadFoldAssignment);
    }

    let mut predictions = vec![0.0f64; n];
    for fold in folds {
        let held_out: HashSet<usize> = fold.iter().copied().collect();
        let train: Vec<ManifestEntry> = entries
            .iter()
            .enumerate()
            .filter(|(i, _)| !held_out.contains(i))
            .map(|(_, e)| e.clone())
            .collect();
        let coefs = ols_fit_with(&train, options)?;
        for &i in fold {
            predictions[i] = predict(coefs, &entries[i]);
        }
    }

    // Pool residuals in entry order so summation is bit-stable.
    let targets: Vec<f64> = entries.iter().map(|e| e.performance).collect();
    let residuals: Vec<f64> = targets
        .iter()
        .zip(&predictions)
        .map(|(y, p)| y - p)
        .collect();
    let target_variance = population_variance(&targets);
    if target_variance == 0.0 {
        return Err(StatsError::ConstantTarget);
    }
    let explained_variance = 1.0 - population_variance(&residuals) / target_variance;
    let mae = residuals.iter().map(|r| r.abs()).sum::<f64>() / n as f64;
    Ok((explained_variance, mae))
}

// ---------------------------------------------------------------------------
// Spearman rank correlation
// ---------------------------------------------------------------------------

/// Spearman's rho: Pearson correlation of average-tie rank vectors.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFewEntries {
            found: xs.len(),
            minimum: 2,
        });
    }
    for (side, values) in [("xs", xs), ("ys", ys)] {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFiniteInput { side });
        }
        let first = values[0];
        if values.iter().all(|&v| v == first) {
            return Err(StatsError::ConstantInput { side });
        }
    }

    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in rx.iter().zip(&ry) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Rank of each value, 1-based; tied values share the average of the ranks
/// they would occupy. Counting form: exact for any input size that fits the
/// f64 integer range, and independent of traversal order.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let less = values.iter().filter(|&&w| w < v).count();
            let equal = values.iter().filter(|&&w| w == v).count();
            // 1 + less + (equal - 1)/2, with the tie term kept dyadic.
            less as f64 + 1.0 + (equal - 1) as f64 / 2.0
        })
        .collect()
}

// ---------------------------------------------------------------------------
// End-to-end analysis
// ---------------------------------------------------------------------------

/// Full protocol on one manifest series: OLS fit (in-sample R² reported as
/// the regression score), k-fold CV, and spearman(leakage, performance).
pub fn analyze(
    entries: &[ManifestEntry],
    k: usize,
    seed: u64,
) -> Result<RegressionResult, StatsError> {
    analyze_with(entries, k, seed, OlsOptions::default())
}

/// [`analyze`] with explicit numerical options.
pub fn analyze_with(
    entries: &[ManifestEntry],
    k: usize,
    seed: u64,
    options: OlsOptions,
) -> Result<RegressionResult, StatsError> {
    let (alpha, beta, gamma) = ols_fit_with(entries, options)?;

    let targets: Vec<f64> = entries.iter().map(|e| e.performance).collect();
    let ss_tot = population_variance(&targets) * entries.len() as f64;
    if ss_tot == 0.0 {
        return Err(StatsError::ConstantTarget);
    }
    let ss_res: f64 = entries
        .iter()
        .map(|e| (e.performance - predict((alpha, beta, gamma), e)).powi(2))
        .sum();
    let regression_score = 1.0 - ss_res / ss_tot;

    let (explained_variance_cv, mae_cv) = kfold_cv_with(entries, k, seed, options)?;
    let phis: Vec<f64> = entries.iter().map(|e| e.leakage_phi).collect();
    let spearman_rho = spearman(&phis, &targets)?;

    Ok(RegressionResult {
        alpha,
        beta,
        gamma,
        regression_score,
        explained_variance_cv,
        mae_cv,
        spearman_rho,
        k,
        seed,
    })
}
