//! Prediction-quality metrics.
//!
//! Five scalar metrics (MSE, RMSE, MAE, MAPE, R²) computed over paired
//! actual/predicted vectors. Note that MAPE here is *max-normalized*:
//! every absolute error is divided by the maximum actual value, not by the
//! per-sample actual. That matches the convention of the rest of this
//! project's evaluation tooling; the textbook per-sample variant is
//! available via the `conventional_mape` flag but is never the default.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

/// Scalar quality metrics for one actual-vs-predicted comparison.
///
/// `mape` is absent when the maximum actual value is zero (its normalizer
/// vanishes); `r2` is absent when the actuals carry no variance (the
/// baseline of "predict the mean" is degenerate). Every other field is
/// always present.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MetricsReport<T: Scalar> {
    pub n: usize,
    pub mse: T,
    pub rmse: T,
    pub mae: T,
    pub mape: Option<T>,
    pub r2: Option<T>,
}

/// Compute all metrics with the default (max-normalized) MAPE.
pub fn compute_metrics<T: Scalar>(
    actual: &ArrayView1<T>,
    predicted: &ArrayView1<T>,
) -> Result<MetricsReport<T>> {
    compute_metrics_opts(actual, predicted, false)
}

/// Compute all metrics, selecting the MAPE convention.
///
/// With `conventional_mape = false` (the default everywhere in this crate),
/// MAPE = (1/n) Σ |y_i − ŷ_i| / max(y). With `true`, the textbook
/// per-sample form (1/n) Σ |y_i − ŷ_i| / |y_i| is used instead and is
/// absent when any actual is zero.
pub fn compute_metrics_opts<T: Scalar>(
    actual: &ArrayView1<T>,
    predicted: &ArrayView1<T>,
    conventional_mape: bool,
) -> Result<MetricsReport<T>> {
    let n = actual.len();
    if n == 0 {
        return Err(Error::InsufficientData(
            "metrics need at least one sample".into(),
        ));
    }
    if predicted.len() != n {
        return Err(Error::Data(format!(
            "actual has {n} samples but predicted has {}",
            predicted.len()
        )));
    }
    for (i, (&y, &p)) in actual.iter().zip(predicted.iter()).enumerate() {
        if !y.is_finite() || !p.is_finite() {
            return Err(Error::Data(format!(
                "non-finite sample at index {i}: actual {y}, predicted {p}"
            )));
        }
    }

    let nf = T::from_usize_const(n);
    let mut sq_sum = T::zero();
    let mut abs_sum = T::zero();
    for (&y, &p) in actual.iter().zip(predicted.iter()) {
        let e = y - p;
        sq_sum += e * e;
        abs_sum += e.abs();
    }
    let mse = sq_sum / nf;
    let rmse = mse.sqrt();
    let mae = abs_sum / nf;

    let mape = if conventional_mape {
        if actual.iter().any(|&y| y == T::zero()) {
            log::warn!("conventional MAPE undefined: an actual value is zero");
            None
        } else {
            let mut acc = T::zero();
            for (&y, &p) in actual.iter().zip(predicted.iter()) {
                acc += (y - p).abs() / y.abs();
            }
            Some(acc / nf)
        }
    } else {
        let y_max = actual.iter().fold(T::neg_infinity(), |m, &y| m.max(y));
        if y_max == T::zero() {
            log::warn!("max-normalized MAPE undefined: max(actual) is zero");
            None
        } else {
            Some(abs_sum / y_max / nf)
        }
    };

    let mean = actual.sum() / nf;
    let mut var_sum = T::zero();
    for &y in actual.iter() {
        let c = y - mean;
        var_sum += c * c;
    }
    let r2 = if var_sum > T::zero() {
        Some(T::one() - sq_sum / var_sum)
    } else {
        log::warn!("R² undefined: actual values are constant");
        None
    };

    Ok(MetricsReport {
        n,
        mse,
        rmse,
        mae,
        mape,
        r2,
    })
}

impl<T: Scalar> MetricsReport<T> {
    /// Arithmetic mean of several reports, metric by metric.
    ///
    /// Optional metrics average over the reports where they are present and
    /// stay absent only if no report carries them (constant validation folds
    /// can drop R² individually without poisoning the whole mean).
    pub fn mean_of(reports: &[MetricsReport<T>]) -> Option<MetricsReport<T>> {
        if reports.is_empty() {
            return None;
        }
        let count = T::from_usize_const(reports.len());
        let mut out = MetricsReport {
            n: reports.iter().map(|r| r.n).sum(),
            mse: T::zero(),
            rmse: T::zero(),
            mae: T::zero(),
            mape: None,
            r2: None,
        };
        for r in reports {
            out.mse += r.mse / count;
            out.rmse += r.rmse / count;
            out.mae += r.mae / count;
        }
        let mean_opt = |take: &dyn Fn(&MetricsReport<T>) -> Option<T>| {
            let present: Vec<T> = reports.iter().filter_map(take).collect();
            if present.is_empty() {
                None
            } else {
                let k = T::from_usize_const(present.len());
                Some(present.into_iter().fold(T::zero(), |a, v| a + v) / k)
            }
        };
        out.mape = mean_opt(&|r| r.mape);
        out.r2 = mean_opt(&|r| r.r2);
        Some(out)
    }
}
