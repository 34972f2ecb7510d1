//! k-fold cross-validation and side-by-side method comparison.
//!
//! Any estimator that can fit a training set and predict at query points
//! plugs in through the [`Interpolator`] trait. Cross-validation uses a
//! seeded shuffle with contiguous fold splits, so a fixed seed reproduces
//! the exact fold assignment; comparison tables evaluate several methods
//! under one shared protocol and isolate per-method failures to their row.

use crate::baselines::{
    fit_variogram, gp_predict, idw_predict, kriging_predict, GpConfig, IdwConfig, VariogramKind,
};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, MetricsReport};
use crate::observations::{Observation, ObservationSet};
use crate::scalar::Scalar;
use ndarray::{Array1, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// A spatial estimator that fits a training set and predicts at points.
///
/// Implementations must be deterministic: the same observations and queries
/// must yield the same predictions (seed any internal randomness from
/// configuration, not entropy).
pub trait Interpolator<T: Scalar> {
    /// Short lowercase label used in report rows.
    fn name(&self) -> String;

    /// Smallest training set the method can be fitted on. Cross-validation
    /// checks this against every fold's training size before fitting
    /// anything, so an infeasible split fails fast as a configuration
    /// error rather than midway through the folds.
    fn min_train_size(&self) -> usize {
        1
    }

    /// Fit on `obs` and return one predicted value per query point.
    fn fit_predict(&self, obs: &ObservationSet<T>, queries: &[(T, T)]) -> Result<Array1<T>>;
}

/// Inverse-distance weighting adapter.
#[derive(Debug, Clone, Default)]
pub struct IdwMethod<T: Scalar> {
    pub config: IdwConfig<T>,
}

impl<T: Scalar> Interpolator<T> for IdwMethod<T> {
    fn name(&self) -> String {
        "idw".into()
    }

    fn fit_predict(&self, obs: &ObservationSet<T>, queries: &[(T, T)]) -> Result<Array1<T>> {
        idw_predict(obs, queries, &self.config)
    }
}

/// Ordinary-kriging adapter: fits a variogram of the given shape on the
/// training set, then solves the kriging system per query.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrigingMethod {
    pub variogram: VariogramKind,
    pub n_lags: usize,
}

impl Default for KrigingMethod {
    fn default() -> Self {
        Self {
            variogram: VariogramKind::Exponential,
            n_lags: 15,
        }
    }
}

impl<T: Scalar> Interpolator<T> for KrigingMethod {
    fn name(&self) -> String {
        "kriging".into()
    }

    fn min_train_size(&self) -> usize {
        // The variogram fit refuses smaller samples.
        10
    }

    fn fit_predict(&self, obs: &ObservationSet<T>, queries: &[(T, T)]) -> Result<Array1<T>> {
        let vgm = fit_variogram(obs, self.variogram, self.n_lags)?;
        let (means, _variances) = kriging_predict(obs, queries, &vgm)?;
        Ok(means)
    }
}

/// Gaussian-process regression adapter.
#[derive(Debug, Clone, Default)]
pub struct GpMethod<T: Scalar> {
    pub config: GpConfig<T>,
}

impl<T: Scalar> Interpolator<T> for GpMethod<T> {
    fn name(&self) -> String {
        "gp".into()
    }

    fn min_train_size(&self) -> usize {
        // Hyperparameter grids are built from pairwise distances and the
        // sample variance, both degenerate on a single point.
        2
    }

    fn fit_predict(&self, obs: &ObservationSet<T>, queries: &[(T, T)]) -> Result<Array1<T>> {
        let (means, _variances) = gp_predict(obs, queries, &self.config)?;
        Ok(means)
    }
}

/// Outcome of one k-fold cross-validation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CvResult<T: Scalar> {
    pub k: usize,
    /// Metrics of each held-out fold, in fold order.
    pub per_fold: Vec<MetricsReport<T>>,
    /// Arithmetic mean of the per-fold metrics.
    pub mean_report: MetricsReport<T>,
}

/// Split `0..n` into `k` folds: seeded shuffle, then contiguous chunks.
///
/// Fold sizes differ by at most one (the first `n mod k` folds take the
/// extra point). Every index lands in exactly one fold, so the folds
/// partition the index set.
pub fn fold_indices(n: usize, k: usize, rng_seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    order.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[start..start + size].to_vec());
        start += size;
    }
    folds
}

/// Run seeded k-fold cross-validation of `method` over `obs`.
///
/// Each fold is held out once: the method is fitted on the remaining
/// points and scored on the fold, and the mean report averages the fold
/// metrics. Two points per fold (`N ≥ 2k`) keeps every fold's R² defined;
/// smaller folds still run — leave-one-out (`k = N`) scores single-point
/// folds, whose R² is individually undefined and therefore absent.
///
/// # Errors
///
/// `k` outside `2..=N`, or any fold's training size below the method's
/// [`Interpolator::min_train_size`], is a configuration error raised
/// before any fitting. Fitting or prediction failures propagate as-is.
pub fn k_fold_cv<T: Scalar>(
    obs: &ObservationSet<T>,
    method: &dyn Interpolator<T>,
    k: usize,
    rng_seed: u64,
) -> Result<CvResult<T>> {
    let n = obs.len();
    if k < 2 {
        return Err(Error::Config(format!(
            "cross-validation needs at least 2 folds, got k = {k}"
        )));
    }
    if k > n {
        return Err(Error::Config(format!(
            "cannot split {n} observations into {k} non-empty folds"
        )));
    }
    let folds = fold_indices(n, k, rng_seed);
    let largest_fold = folds.iter().map(Vec::len).max().unwrap_or(0);
    let min_train = n - largest_fold;
    if min_train < method.min_train_size() {
        return Err(Error::Config(format!(
            "method '{}' needs at least {} training points but the smallest \
             cross-validation training split has {min_train}",
            method.name(),
            method.min_train_size()
        )));
    }

    let pts = obs.points();
    let mut per_fold = Vec::with_capacity(k);
    for (f, fold) in folds.iter().enumerate() {
        let mut in_fold = vec![false; n];
        for &i in fold {
            in_fold[i] = true;
        }
        let train: Vec<Observation<T>> = (0..n)
            .filter(|&i| !in_fold[i])
            .map(|i| pts[i].clone())
            .collect();
        let train_set = ObservationSet::new(train)?;
        let queries: Vec<(T, T)> = fold.iter().map(|&i| (pts[i].x, pts[i].y)).collect();
        let truth: Array1<T> = fold.iter().map(|&i| pts[i].value).collect();
        let predicted = method.fit_predict(&train_set, &queries).map_err(|e| {
            log::error!("fold {} of {k} failed: {e}", f + 1);
            e
        })?;
        per_fold.push(compute_metrics(&truth.view(), &predicted.view())?);
    }
    let mean_report =
        MetricsReport::mean_of(&per_fold).expect("k >= 2 guarantees at least one fold");
    Ok(CvResult {
        k,
        per_fold,
        mean_report,
    })
}

/// How [`compare_methods`] scores each method.
pub enum EvaluationProtocol<'a, T: Scalar> {
    /// Fit on all observations, predict the queries, score against truth.
    HeldOut {
        queries: &'a [(T, T)],
        truth: ArrayView1<'a, T>,
    },
    /// Score each method by its k-fold cross-validation mean report.
    CrossValidation { k: usize, rng_seed: u64 },
}

/// One comparison row: a method's metrics, or the error that stopped it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ComparisonRow<T: Scalar> {
    pub method: String,
    pub outcome: std::result::Result<MetricsReport<T>, String>,
}

/// Per-method evaluation results under one shared protocol.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ComparisonTable<T: Scalar> {
    pub rows: Vec<ComparisonRow<T>>,
}

/// Evaluate every method under the same protocol, one row per method.
///
/// A failing method marks only its own row with the error message; the
/// remaining methods still run. The row order follows `methods`.
pub fn compare_methods<T: Scalar>(
    obs: &ObservationSet<T>,
    protocol: &EvaluationProtocol<'_, T>,
    methods: &[&dyn Interpolator<T>],
) -> Result<ComparisonTable<T>> {
    if let EvaluationProtocol::HeldOut { queries, truth } = protocol {
        if queries.len() != truth.len() {
            return Err(Error::Config(format!(
                "{} query points but {} truth values",
                queries.len(),
                truth.len()
            )));
        }
        if queries.is_empty() {
            return Err(Error::Config(
                "held-out comparison needs at least one query point".into(),
            ));
        }
    }
    let mut rows = Vec::with_capacity(methods.len());
    for &method in methods {
        let report = match protocol {
            EvaluationProtocol::HeldOut { queries, truth } => method
                .fit_predict(obs, queries)
                .and_then(|pred| compute_metrics(truth, &pred.view())),
            EvaluationProtocol::CrossValidation { k, rng_seed } => {
                k_fold_cv(obs, method, *k, *rng_seed).map(|cv| cv.mean_report)
            }
        };
        let outcome = report.map_err(|e| {
            log::warn!("method '{}' failed: {e}", method.name());
            e.to_string()
        });
        rows.push(ComparisonRow {
            method: method.name(),
            outcome,
        });
    }
    Ok(ComparisonTable { rows })
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

pub(crate) const METRIC_HEADER: [&str; 6] = ["n", "mse", "rmse", "mae", "mape", "r2"];

fn fmt_fixed<T: Scalar>(v: T) -> String {
    format!("{v:.6}")
}

fn fmt_fixed_opt<T: Scalar>(v: Option<T>) -> String {
    v.map_or_else(|| "-".into(), fmt_fixed)
}

/// Full-precision cell for delimited output (`Display` on floats prints
/// the shortest string that parses back to the same value).
fn fmt_full<T: Scalar>(v: T) -> String {
    format!("{v}")
}

fn fmt_full_opt<T: Scalar>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".into(), fmt_full)
}

pub(crate) fn metric_cells<T: Scalar>(r: &MetricsReport<T>, full: bool) -> Vec<String> {
    if full {
        vec![
            r.n.to_string(),
            fmt_full(r.mse),
            fmt_full(r.rmse),
            fmt_full(r.mae),
            fmt_full_opt(r.mape),
            fmt_full_opt(r.r2),
        ]
    } else {
        vec![
            r.n.to_string(),
            fmt_fixed(r.mse),
            fmt_fixed(r.rmse),
            fmt_fixed(r.mae),
            fmt_fixed_opt(r.mape),
            fmt_fixed_opt(r.r2),
        ]
    }
}

/// Pad cells into columns: first column left-aligned, the rest right-aligned.
pub(crate) fn align_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (c, cell) in row.iter().enumerate() {
            width[c] = width[c].max(cell.len());
        }
    }
    let mut out = String::new();
    let mut emit = |cells: &[String]| {
        for (c, cell) in cells.iter().enumerate() {
            if c > 0 {
                out.push_str("  ");
            }
            if c == 0 {
                out.push_str(&format!("{cell:<w$}", w = width[c]));
            } else {
                out.push_str(&format!("{cell:>w$}", w = width[c]));
            }
        }
        // Trailing spaces from the last pad are unwanted.
        while out.ends_with(' ') {
            out.pop();
        }
        out.push('\n');
    };
    emit(&header.iter().map(|h| (*h).to_string()).collect::<Vec<_>>());
    for row in rows {
        let mut cells = row.clone();
        cells.resize(cols, String::new());
        emit(&cells);
    }
    out
}

impl<T: Scalar> CvResult<T> {
    /// Human-readable table: one row per fold plus a mean row.
    pub fn render_aligned(&self) -> String {
        let mut header = vec!["fold"];
        header.extend(METRIC_HEADER);
        let mut rows: Vec<Vec<String>> = Vec::with_capacity(self.per_fold.len() + 1);
        for (f, r) in self.per_fold.iter().enumerate() {
            let mut row = vec![(f + 1).to_string()];
            row.extend(metric_cells(r, false));
            rows.push(row);
        }
        let mut mean = vec!["mean".to_string()];
        mean.extend(metric_cells(&self.mean_report, false));
        rows.push(mean);
        align_table(&header, &rows)
    }

    /// Tab-separated table at full precision; absent metrics print `NA`.
    pub fn to_delimited(&self) -> String {
        let mut out = format!("fold\t{}\n", METRIC_HEADER.join("\t"));
        for (f, r) in self.per_fold.iter().enumerate() {
            out.push_str(&format!(
                "{}\t{}\n",
                f + 1,
                metric_cells(r, true).join("\t")
            ));
        }
        out.push_str(&format!(
            "mean\t{}\n",
            metric_cells(&self.mean_report, true).join("\t")
        ));
        out
    }
}

impl<T: Scalar> ComparisonTable<T> {
    /// Human-readable table, one row per method; failed methods show the
    /// error message in place of metrics.
    pub fn render_aligned(&self) -> String {
        let mut header = vec!["method"];
        header.extend(METRIC_HEADER);
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|row| {
                let mut cells = vec![row.method.clone()];
                match &row.outcome {
                    Ok(r) => cells.extend(metric_cells(r, false)),
                    Err(msg) => cells.push(format!("failed: {msg}")),
                }
                cells
            })
            .collect();
        align_table(&header, &rows)
    }

    /// Tab-separated table at full precision with a status column.
    pub fn to_delimited(&self) -> String {
        let mut out = format!("method\tstatus\t{}\tdetail\n", METRIC_HEADER.join("\t"));
        for row in &self.rows {
            match &row.outcome {
                Ok(r) => out.push_str(&format!(
                    "{}\tok\t{}\t\n",
                    row.method,
                    metric_cells(r, true).join("\t")
                )),
                Err(msg) => out.push_str(&format!(
                    "{}\tfailed\tNA\tNA\tNA\tNA\tNA\tNA\t{}\n",
                    row.method,
                    msg.replace(['\t', '\n'], " ")
                )),
            }
        }
        out
    }
}
