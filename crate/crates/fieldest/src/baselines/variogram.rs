//! Empirical variogram estimation and weighted-least-squares model fitting.

use crate::error::{Error, Result};
use crate::observations::ObservationSet;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Parametric variogram families.
///
/// All three use the practical-range convention: the model reaches ~95% of
/// its partial sill at `h = range`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariogramKind {
    Spherical,
    Exponential,
    Gaussian,
}

impl VariogramKind {
    /// Unit shape g(x) rising from 0 to 1, with x = h/range.
    fn shape<T: Scalar>(&self, x: T) -> T {
        let one = T::one();
        match self {
            VariogramKind::Spherical => {
                if x >= one {
                    one
                } else {
                    let half = T::from_f64_const(0.5);
                    let three_halves = T::from_f64_const(1.5);
                    three_halves * x - half * x * x * x
                }
            }
            VariogramKind::Exponential => one - (-T::from_f64_const(3.0) * x).exp(),
            VariogramKind::Gaussian => one - (-T::from_f64_const(3.0) * x * x).exp(),
        }
    }
}

/// A fitted variogram: γ(h) = nugget + (sill − nugget)·g(h/range) for
/// h > 0, with γ(0) = 0 by convention (the nugget is a discontinuity).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct VariogramModel<T: Scalar> {
    pub kind: VariogramKind,
    pub nugget: T,
    pub sill: T,
    pub range: T,
    /// Lag/semivariance table retained from the fit for inspection:
    /// (lag midpoint, empirical semivariance, pair count).
    pub empirical: Vec<(T, T, usize)>,
}

impl<T: Scalar> VariogramModel<T> {
    /// Evaluate the model at lag `h`.
    pub fn gamma(&self, h: T) -> T {
        if h <= T::zero() {
            return T::zero();
        }
        self.nugget + (self.sill - self.nugget) * self.kind.shape(h / self.range)
    }

    /// The lag/semivariance table as delimited text (lag, semivariance,
    /// pairs), one bin per line.
    pub fn empirical_table(&self) -> String {
        let mut out = String::from("lag\tsemivariance\tpairs\n");
        for &(lag, gamma, count) in &self.empirical {
            out.push_str(&format!("{lag}\t{gamma}\t{count}\n"));
        }
        out
    }
}

/// Fit a variogram model to the observations.
///
/// Pairwise semivariances are binned into `n_lags` equal-width lags up to
/// half the maximum pairwise distance; model parameters minimize the
/// pair-count-weighted squared error via a deterministic refined grid
/// search (the partial sill has a closed-form optimum given nugget and
/// range, so the search is two-dimensional).
pub fn fit_variogram<T: Scalar>(
    obs: &ObservationSet<T>,
    kind: VariogramKind,
    n_lags: usize,
) -> Result<VariogramModel<T>> {
    let n = obs.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "variogram fitting needs at least 10 observations, got {n}"
        )));
    }
    if n_lags == 0 {
        return Err(Error::Config("n_lags must be positive".into()));
    }

    let pts = obs.points();
    let mut max_dist = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            let dx = pts[i].x - pts[j].x;
            let dy = pts[i].y - pts[j].y;
            max_dist = max_dist.max((dx * dx + dy * dy).sqrt());
        }
    }
    let cutoff = max_dist * T::from_f64_const(0.5);
    let width = cutoff / T::from_usize_const(n_lags);

    let mut sums = vec![T::zero(); n_lags];
    let mut counts = vec![0usize; n_lags];
    for i in 0..n {
        for j in i + 1..n {
            let dx = pts[i].x - pts[j].x;
            let dy = pts[i].y - pts[j].y;
            let h = (dx * dx + dy * dy).sqrt();
            if h > cutoff || h <= T::zero() {
                continue;
            }
            let mut bin = (h / width).to_f64().unwrap_or(0.0).floor() as usize;
            bin = bin.min(n_lags - 1);
            let dv = pts[i].value - pts[j].value;
            sums[bin] += dv * dv * T::from_f64_const(0.5);
            counts[bin] += 1;
        }
    }

    let half = T::from_f64_const(0.5);
    let empirical: Vec<(T, T, usize)> = (0..n_lags)
        .filter(|&b| counts[b] > 0)
        .map(|b| {
            let mid = width * (T::from_usize_const(b) + half);
            (mid, sums[b] / T::from_usize_const(counts[b]), counts[b])
        })
        .collect();

    let gamma_max = empirical
        .iter()
        .fold(T::zero(), |m, &(_, g, _)| m.max(g));
    if empirical.is_empty() || !(gamma_max > T::zero()) {
        // No spatial variance at all: fall back to a (numerically) pure
        // nugget model so downstream systems stay well defined.
        log::warn!("all observed values identical; falling back to a pure-nugget variogram");
        return Ok(VariogramModel {
            kind,
            nugget: T::zero(),
            sill: T::from_f64_const(1e-12),
            range: cutoff.max(T::one()),
            empirical,
        });
    }

    // Weighted least squares over (nugget, range); the optimal partial sill
    // given those two is closed-form because the model is linear in it.
    let best_psill = |nugget: T, range: T| -> T {
        let mut num = T::zero();
        let mut den = T::zero();
        for &(h, g, c) in &empirical {
            let s = kind.shape(h / range);
            let w = T::from_usize_const(c);
            num += w * s * (g - nugget);
            den += w * s * s;
        }
        if den > T::zero() {
            (num / den).max(T::from_f64_const(1e-12) * gamma_max)
        } else {
            gamma_max
        }
    };
    let wsse = |nugget: T, range: T, psill: T| -> T {
        let mut acc = T::zero();
        for &(h, g, c) in &empirical {
            let model = nugget + psill * kind.shape(h / range);
            let r = model - g;
            acc += T::from_usize_const(c) * r * r;
        }
        acc
    };

    let h_lo = empirical.first().expect("non-empty").0;
    let mut nugget_lo = T::zero();
    let mut nugget_hi = gamma_max * T::from_f64_const(0.6);
    let mut range_lo = h_lo;
    let mut range_hi = cutoff * T::from_f64_const(1.5);
    let mut best = (T::infinity(), T::zero(), cutoff, gamma_max);

    for _ in 0..3 {
        let mut round_best = (T::infinity(), T::zero(), T::zero(), T::zero());
        for ni in 0..12 {
            let nugget = nugget_lo
                + (nugget_hi - nugget_lo) * T::from_usize_const(ni) / T::from_usize_const(11);
            for ri in 0..24 {
                let range = range_lo
                    + (range_hi - range_lo) * T::from_usize_const(ri) / T::from_usize_const(23);
                if !(range > T::zero()) {
                    continue;
                }
                let psill = best_psill(nugget, range);
                let err = wsse(nugget, range, psill);
                if err < round_best.0 {
                    round_best = (err, nugget, range, psill);
                }
            }
        }
        if round_best.0 < best.0 {
            best = round_best;
        }
        // Shrink the search box around the incumbent.
        let (_, n0, r0, _) = best;
        let n_span = (nugget_hi - nugget_lo) * T::from_f64_const(0.2);
        let r_span = (range_hi - range_lo) * T::from_f64_const(0.2);
        nugget_lo = (n0 - n_span).max(T::zero());
        nugget_hi = n0 + n_span;
        range_lo = (r0 - r_span).max(h_lo * T::from_f64_const(0.1));
        range_hi = r0 + r_span;
    }

    let (_, nugget, range, psill) = best;
    Ok(VariogramModel {
        kind,
        nugget,
        sill: nugget + psill,
        range,
        empirical,
    })
}
