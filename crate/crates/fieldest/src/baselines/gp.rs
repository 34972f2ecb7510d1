//! Gaussian process regression baseline.

use crate::error::{Error, Result};
use crate::linalg;
use crate::observations::ObservationSet;
use crate::scalar::Scalar;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

/// Covariance kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GpKernel {
    SquaredExponential,
    Exponential,
}

impl GpKernel {
    /// Covariance at distance `d` for unit signal variance.
    fn unit<T: Scalar>(&self, d: T, length_scale: T) -> T {
        match self {
            GpKernel::SquaredExponential => {
                let r = d / length_scale;
                (-T::from_f64_const(0.5) * r * r).exp()
            }
            GpKernel::Exponential => (-(d / length_scale)).exp(),
        }
    }
}

/// Hyperparameter selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HyperparameterFit {
    /// Use the configured length scale and signal variance as-is.
    Fixed,
    /// Maximize the log marginal likelihood over a log-spaced 10×10 grid
    /// of (length scale, signal variance) spanning the data scales.
    GridMl,
}

/// Settings for [`gp_predict`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GpConfig<T: Scalar> {
    pub kernel: GpKernel,
    pub length_scale: T,
    pub signal_variance: T,
    /// Observation noise added to the covariance diagonal.
    pub noise_variance: T,
    pub hyperparameter_fit: HyperparameterFit,
}

impl<T: Scalar> Default for GpConfig<T> {
    fn default() -> Self {
        Self {
            kernel: GpKernel::Exponential,
            length_scale: T::one(),
            signal_variance: T::one(),
            noise_variance: T::from_f64_const(1e-6),
            hyperparameter_fit: HyperparameterFit::GridMl,
        }
    }
}

impl<T: Scalar> GpConfig<T> {
    /// Check the config is internally consistent.
    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > T::zero()) {
            return Err(Error::Config("length_scale must be positive".into()));
        }
        if !(self.signal_variance > T::zero()) {
            return Err(Error::Config("signal_variance must be positive".into()));
        }
        if self.noise_variance < T::zero() {
            return Err(Error::Config("noise_variance must be non-negative".into()));
        }
        Ok(())
    }
}

/// Cholesky-factor the noisy covariance, escalating diagonal jitter by
/// factors of 10 (up to 1e-2 absolute) if the matrix is not numerically
/// positive definite.
fn factor_covariance<T: Scalar>(mut k: Array2<T>, noise: T) -> Result<Array2<T>> {
    let n = k.nrows();
    for i in 0..n {
        k[[i, i]] += noise;
    }
    match linalg::cholesky(&k.view()) {
        Ok(l) => Ok(l),
        Err(_) => {
            let cap = T::from_f64_const(1e-2);
            let mut jitter = T::from_f64_const(1e-8);
            while jitter <= cap {
                log::warn!("covariance not positive definite; retrying with jitter {jitter}");
                let mut kj = k.clone();
                for i in 0..n {
                    kj[[i, i]] += jitter;
                }
                if let Ok(l) = linalg::cholesky(&kj.view()) {
                    return Ok(l);
                }
                jitter = jitter * T::from_f64_const(10.0);
            }
            Err(Error::Numerical(
                "covariance factorization failed even at maximum jitter".into(),
            ))
        }
    }
}

/// Log marginal likelihood of centered targets under the factored
/// covariance: −½·yᵀα − ½·log|K| − (n/2)·log 2π.
fn log_marginal<T: Scalar>(l: &Array2<T>, y: &Array1<T>) -> T {
    let alpha = linalg::cholesky_solve(&l.view(), &y.view());
    let n = T::from_usize_const(y.len());
    let half = T::from_f64_const(0.5);
    let two_pi = T::from_f64_const(std::f64::consts::TAU);
    let fit = y.iter().zip(alpha.iter()).fold(T::zero(), |s, (&a, &b)| s + a * b);
    -half * fit - half * linalg::cholesky_log_det(&l.view()) - half * n * two_pi.ln()
}

/// Posterior mean and variance at each query.
///
/// Values are mean-centered for the solve and restored on output. With
/// grid-ML fitting, the length scale spans [max distance/100, max
/// distance] and the signal variance [data variance/100, data variance·10],
/// both log-spaced, and the pair maximizing the marginal likelihood wins;
/// ties resolve to the first (smallest) grid point so results are
/// deterministic. The reported variance is the function posterior
/// `k(0) − k_qᵀ K⁻¹ k_q`, floored at zero.
pub fn gp_predict<T: Scalar>(
    obs: &ObservationSet<T>,
    queries: &[(T, T)],
    cfg: &GpConfig<T>,
) -> Result<(Array1<T>, Array1<T>)> {
    cfg.validate()?;
    let n = obs.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "gaussian process regression needs at least 2 observations".into(),
        ));
    }
    let pts = obs.points();
    let mean = obs.values().iter().fold(T::zero(), |s, &v| s + v) / T::from_usize_const(n);
    let centered: Array1<T> = obs.values().iter().map(|&v| v - mean).collect();

    let mut dists = Array2::zeros((n, n));
    let mut max_dist = T::zero();
    for i in 0..n {
        for j in 0..n {
            let dx = pts[i].x - pts[j].x;
            let dy = pts[i].y - pts[j].y;
            let d = (dx * dx + dy * dy).sqrt();
            dists[[i, j]] = d;
            max_dist = max_dist.max(d);
        }
    }

    let (length_scale, signal_variance) = match cfg.hyperparameter_fit {
        HyperparameterFit::Fixed => (cfg.length_scale, cfg.signal_variance),
        HyperparameterFit::GridMl => {
            let var = {
                let s2 = centered.iter().fold(T::zero(), |s, &v| s + v * v)
                    / T::from_usize_const(n);
                s2.max(T::from_f64_const(1e-12))
            };
            let ls_lo = (max_dist / T::from_f64_const(100.0)).max(T::from_f64_const(1e-9));
            let ls_hi = max_dist.max(ls_lo * T::from_f64_const(10.0));
            let sv_lo = var / T::from_f64_const(100.0);
            let sv_hi = var * T::from_f64_const(10.0);
            let mut best = (T::neg_infinity(), cfg.length_scale, cfg.signal_variance);
            for li in 0..10 {
                let frac = T::from_usize_const(li) / T::from_usize_const(9);
                let ls = ls_lo * (ls_hi / ls_lo).powf(frac);
                for si in 0..10 {
                    let frac = T::from_usize_const(si) / T::from_usize_const(9);
                    let sv = sv_lo * (sv_hi / sv_lo).powf(frac);
                    let mut k = Array2::zeros((n, n));
                    for i in 0..n {
                        for j in 0..n {
                            k[[i, j]] = sv * cfg.kernel.unit(dists[[i, j]], ls);
                        }
                    }
                    let Ok(l) = factor_covariance(k, cfg.noise_variance) else {
                        continue;
                    };
                    let ml = log_marginal(&l, &centered);
                    if ml > best.0 {
                        best = (ml, ls, sv);
                    }
                }
            }
            if best.0 == T::neg_infinity() {
                return Err(Error::Numerical(
                    "no hyperparameter grid point produced a usable covariance".into(),
                ));
            }
            (best.1, best.2)
        }
    };

    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            k[[i, j]] = signal_variance * cfg.kernel.unit(dists[[i, j]], length_scale);
        }
    }
    let l = factor_covariance(k, cfg.noise_variance)?;
    let alpha = linalg::cholesky_solve(&l.view(), &centered.view());

    let mut means = Array1::zeros(queries.len());
    let mut variances = Array1::zeros(queries.len());
    for (qi, &(qx, qy)) in queries.iter().enumerate() {
        if !qx.is_finite() || !qy.is_finite() {
            return Err(Error::Data(format!(
                "query {qi} has non-finite coordinates"
            )));
        }
        let kq: Array1<T> = (0..n)
            .map(|i| {
                let dx = pts[i].x - qx;
                let dy = pts[i].y - qy;
                signal_variance * cfg.kernel.unit((dx * dx + dy * dy).sqrt(), length_scale)
            })
            .collect();
        let mut m = T::zero();
        for i in 0..n {
            m += kq[i] * alpha[i];
        }
        means[qi] = m + mean;
        let w = linalg::cholesky_solve(&l.view(), &kq.view());
        let mut quad = T::zero();
        for i in 0..n {
            quad += kq[i] * w[i];
        }
        variances[qi] = (signal_variance - quad).max(T::zero());
    }
    Ok((means, variances))
}
