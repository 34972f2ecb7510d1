//! Takagi–Sugeno fuzzy rule estimator with hybrid training.
//!
//! The estimator covers each input dimension with two bell membership
//! functions, forms one rule per combination (2^d rules), fires rules with
//! a product T-norm, and outputs the firing-strength-weighted average of
//! per-rule linear models. Training alternates two passes per epoch:
//! consequent coefficients by recursive least squares with the premise
//! frozen, then premise parameters by full-batch gradient descent with
//! momentum.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Memberships per dimension. Rules enumerate the full Cartesian product,
/// so rule count is `MFS_PER_DIM^d`.
pub const MFS_PER_DIM: usize = 2;

/// Epochs over which the premise momentum term ramps up to full strength.
/// Damping early momentum keeps the first premise steps from overshooting
/// while the consequents are still settling.
const MOMENTUM_WARMUP_EPOCHS: usize = 20;

/// Momentum coefficient for the premise updates.
const MOMENTUM_BETA: f64 = 0.9;

/// Lower clamp keeping bell widths and slopes strictly positive.
const MIN_WIDTH_SLOPE: f64 = 1e-4;

/// Generalized bell membership function `μ(s) = 1/(1 + (((s−g)/e)²)^f)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BellMF<T: Scalar> {
    /// Width; μ(g ± e) = 0.5 regardless of slope.
    pub e: T,
    /// Slope; larger values sharpen the shoulders.
    pub f: T,
    /// Center; μ(g) = 1.
    pub g: T,
}

impl<T: Scalar> BellMF<T> {
    /// Membership degree at `s`, in (0, 1] up to floating-point underflow.
    pub fn mu(&self, s: T) -> T {
        let w = (s - self.g) / self.e;
        let u = w * w;
        T::one() / (T::one() + u.powf(self.f))
    }

    /// Natural log of the membership, stable when `μ` underflows.
    fn ln_mu(&self, s: T) -> T {
        let w = (s - self.g) / self.e;
        let u = w * w;
        if u == T::zero() {
            return T::zero();
        }
        let lq = self.f * u.ln();
        if lq > T::from_f64_const(700.0) {
            // 1 + u^f ≈ u^f far out on the shoulder.
            -lq
        } else {
            -lq.exp().ln_1p()
        }
    }
}

/// A full rule base: 2 bell MFs per dimension and one linear consequent
/// row per rule.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RuleBase<T: Scalar> {
    pub d: usize,
    /// 2d membership functions, dimension-major: `mfs[2l + k]` is MF k of
    /// dimension l.
    pub mfs: Vec<BellMF<T>>,
    /// 2^d × (d+1) consequents; row t is `[p₁, …, p_d, intercept]`.
    pub consequents: Array2<T>,
}

/// Settings for [`RuleBase::fit`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TrainConfig<T: Scalar> {
    pub epochs: usize,
    /// Premise learning rate.
    pub lr: T,
    /// RLS forgetting factor λ ∈ (0.9, 1].
    pub rls_forgetting: T,
    /// Scale of the initial RLS covariance (acts as an inverse ridge
    /// strength; large values approach unregularized least squares).
    pub rls_init_cov: T,
    /// Stop when relative RMSE improvement over 10 epochs falls below this.
    pub early_stop_tol: T,
    pub rng_seed: u64,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: T::from_f64_const(0.01),
            rls_forgetting: T::one(),
            rls_init_cov: T::from_f64_const(1e6),
            early_stop_tol: T::from_f64_const(1e-6),
            rng_seed: 0,
        }
    }
}

impl<T: Scalar> TrainConfig<T> {
    /// Check the config is internally consistent.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.lr > T::zero()) {
            return Err(Error::Config("lr must be positive".into()));
        }
        let lo = T::from_f64_const(0.9);
        if !(self.rls_forgetting > lo && self.rls_forgetting <= T::one()) {
            return Err(Error::Config(format!(
                "rls_forgetting must lie in (0.9, 1], got {}",
                self.rls_forgetting
            )));
        }
        if !(self.rls_init_cov > T::zero()) {
            return Err(Error::Config("rls_init_cov must be positive".into()));
        }
        if !(self.early_stop_tol > T::zero()) {
            return Err(Error::Config("early_stop_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FitReport<T: Scalar> {
    /// Training RMSE per epoch, recorded after the consequent pass.
    pub rmse_per_epoch: Vec<T>,
    pub epochs_run: usize,
    /// Final premise parameters, flattened as `[e, f, g]` per MF in
    /// dimension-major order (length 6d).
    pub premise: Vec<T>,
    /// Final consequents.
    pub consequents: Array2<T>,
}

/// Linear-interpolated percentile (q in [0, 100]) of an unsorted slice.
fn percentile<T: Scalar>(values: &[T], q: f64) -> T {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n == 1 {
        return v[0];
    }
    let h = T::from_f64_const(q / 100.0) * T::from_usize_const(n - 1);
    let lo = h.floor().to_f64().unwrap_or(0.0) as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - T::from_usize_const(lo);
    v[lo] + frac * (v[hi] - v[lo])
}

impl<T: Scalar> RuleBase<T> {
    /// Build an untrained rule base from the training inputs.
    ///
    /// Per dimension, the two MF centers sit at the 25th and 75th
    /// percentiles, widths are a quarter of the observed range, and the
    /// slope starts at 2 — guaranteeing every input fires every rule with
    /// strictly positive strength. Consequents start at zero.
    pub fn init(inputs: &ArrayView2<T>) -> Result<Self> {
        let n = inputs.nrows();
        let d = inputs.ncols();
        if n < 2 {
            return Err(Error::InsufficientData(
                "rule base initialization needs at least 2 rows".into(),
            ));
        }
        if d == 0 {
            return Err(Error::Config("rule base needs at least 1 input dimension".into()));
        }
        let mut mfs = Vec::with_capacity(MFS_PER_DIM * d);
        for l in 0..d {
            let col: Vec<T> = inputs.column(l).to_vec();
            let lo = col.iter().fold(T::infinity(), |a, &v| a.min(v));
            let hi = col.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
            let range = hi - lo;
            if !(range > T::zero()) {
                return Err(Error::DegenerateGeometry(format!(
                    "input dimension {l} is constant; cannot place membership functions"
                )));
            }
            let e = range / T::from_f64_const((2 * MFS_PER_DIM) as f64);
            let f = T::from_f64_const(2.0);
            mfs.push(BellMF { e, f, g: percentile(&col, 25.0) });
            mfs.push(BellMF { e, f, g: percentile(&col, 75.0) });
        }
        let t_count = 1usize << d;
        Ok(Self {
            d,
            mfs,
            consequents: Array2::zeros((t_count, d + 1)),
        })
    }

    /// Number of rules (2^d).
    pub fn rule_count(&self) -> usize {
        1 << self.d
    }

    /// Premise parameters flattened to `[e, f, g]` per MF (length 6d).
    pub fn premise_vector(&self) -> Vec<T> {
        let mut p = Vec::with_capacity(6 * self.d);
        for mf in &self.mfs {
            p.push(mf.e);
            p.push(mf.f);
            p.push(mf.g);
        }
        p
    }

    /// Overwrite the premise from a flattened vector (inverse of
    /// [`Self::premise_vector`]).
    pub fn set_premise_vector(&mut self, p: &[T]) -> Result<()> {
        if p.len() != 6 * self.d {
            return Err(Error::Config(format!(
                "premise vector length {} does not match 6d = {}",
                p.len(),
                6 * self.d
            )));
        }
        for (mf, chunk) in self.mfs.iter_mut().zip(p.chunks_exact(3)) {
            mf.e = chunk[0];
            mf.f = chunk[1];
            mf.g = chunk[2];
        }
        Ok(())
    }

    /// Normalized firing strengths for one input row.
    ///
    /// Computes the product T-norm directly; if the total strength
    /// underflows below 1e-300 the products are redone in log space and
    /// shifted before normalizing, which leaves the normalized weights
    /// unchanged in exact arithmetic.
    fn firing_strengths(&self, s: &ArrayView1<T>) -> Array1<T> {
        let t_count = self.rule_count();
        let mut mu = Vec::with_capacity(MFS_PER_DIM * self.d);
        for l in 0..self.d {
            for k in 0..MFS_PER_DIM {
                mu.push(self.mfs[MFS_PER_DIM * l + k].mu(s[l]));
            }
        }
        let mut w = Array1::from_elem(t_count, T::one());
        for t in 0..t_count {
            for l in 0..self.d {
                w[t] *= mu[MFS_PER_DIM * l + ((t >> l) & 1)];
            }
        }
        let total = w.sum();
        if total < T::from_f64_const(1e-300) {
            // Log-domain fallback: scale-invariant, so normalization is
            // preserved.
            let mut lw = Array1::zeros(t_count);
            for t in 0..t_count {
                let mut acc = T::zero();
                for l in 0..self.d {
                    acc += self.mfs[MFS_PER_DIM * l + ((t >> l) & 1)].ln_mu(s[l]);
                }
                lw[t] = acc;
            }
            let m = lw.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
            let mut shifted = lw.mapv(|v| (v - m).exp());
            let total = shifted.sum();
            shifted.mapv_inplace(|v| v / total);
            shifted
        } else {
            w.mapv_inplace(|v| v / total);
            w
        }
    }

    /// Evaluate one input row: the estimate and the normalized weights.
    pub fn forward(&self, s: &ArrayView1<T>) -> Result<(T, Array1<T>)> {
        if s.len() != self.d {
            return Err(Error::Config(format!(
                "input has {} dimensions, rule base expects {}",
                s.len(),
                self.d
            )));
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("rule evaluation input must be finite".into()));
        }
        let wbar = self.firing_strengths(s);
        let mut est = T::zero();
        for t in 0..self.rule_count() {
            let mut z = self.consequents[[t, self.d]];
            for l in 0..self.d {
                z += self.consequents[[t, l]] * s[l];
            }
            est += wbar[t] * z;
        }
        Ok((est, wbar))
    }

    /// Evaluate a batch row-wise.
    pub fn predict(&self, batch: &ArrayView2<T>) -> Result<Array1<T>> {
        let mut out = Array1::zeros(batch.nrows());
        for (i, row) in batch.rows().into_iter().enumerate() {
            out[i] = self.forward(&row)?.0;
        }
        Ok(out)
    }

    /// Human-readable IF–THEN dump of every rule.
    pub fn describe(&self) -> String {
        let labels = ["low", "high"];
        let mut out = String::new();
        let _ = writeln!(out, "{} inputs, {} rules, 2 membership functions per input", self.d, self.rule_count());
        for l in 0..self.d {
            for k in 0..MFS_PER_DIM {
                let mf = &self.mfs[MFS_PER_DIM * l + k];
                let _ = writeln!(
                    out,
                    "mf s{}:{}  center {:.6}  width {:.6}  slope {:.6}",
                    l + 1,
                    labels[k],
                    mf.g,
                    mf.e,
                    mf.f
                );
            }
        }
        for t in 0..self.rule_count() {
            let mut cond = String::new();
            for l in 0..self.d {
                if l > 0 {
                    cond.push_str(" AND ");
                }
                let _ = write!(cond, "s{} IS {}", l + 1, labels[(t >> l) & 1]);
            }
            let mut rhs = String::new();
            for l in 0..self.d {
                let _ = write!(rhs, "{:+.6}·s{} ", self.consequents[[t, l]], l + 1);
            }
            let _ = write!(rhs, "{:+.6}", self.consequents[[t, self.d]]);
            let _ = writeln!(out, "rule {:>3}: IF {} THEN value = {}", t + 1, cond, rhs);
        }
        out
    }

    /// Hybrid training: per epoch, a recursive-least-squares sweep refits
    /// the consequents with the premise frozen, then one full-batch
    /// gradient step (momentum 0.9, ramped over the first 20 epochs)
    /// adjusts the premise. RMSE is recorded after the consequent pass;
    /// training stops early once the relative improvement over a 10-epoch
    /// window drops below `early_stop_tol`.
    pub fn fit(
        &mut self,
        inputs: &ArrayView2<T>,
        targets: &ArrayView1<T>,
        cfg: &TrainConfig<T>,
    ) -> Result<FitReport<T>> {
        cfg.validate()?;
        let n = inputs.nrows();
        let d = self.d;
        if inputs.ncols() != d {
            return Err(Error::Config(format!(
                "training inputs have {} dimensions, rule base expects {d}",
                inputs.ncols()
            )));
        }
        if targets.len() != n {
            return Err(Error::Data(format!(
                "{} targets for {} input rows",
                targets.len(),
                n
            )));
        }
        if n <= d + 1 {
            return Err(Error::InsufficientData(format!(
                "need more than d+1 = {} samples to fit consequents, got {n}",
                d + 1
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) || targets.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("training data must be finite".into()));
        }

        let t_count = self.rule_count();
        let p = t_count * (d + 1);
        let mut rmse_per_epoch = Vec::with_capacity(cfg.epochs);
        let mut velocity = vec![T::zero(); 6 * d];
        let beta = T::from_f64_const(MOMENTUM_BETA);
        let clamp_floor = T::from_f64_const(MIN_WIDTH_SLOPE);

        let mut epochs_run = 0;
        for epoch in 0..cfg.epochs {
            // Pass 1: consequents by RLS over the weighted regressor rows,
            // restarted from the prior each epoch so the sweep tracks the
            // current premise.
            let mut theta = vec![T::zero(); p];
            let mut cov = Array2::eye(p);
            cov.mapv_inplace(|v| v * cfg.rls_init_cov);
            let mut row = vec![T::zero(); p];
            for i in 0..n {
                let s = inputs.row(i);
                let wbar = self.firing_strengths(&s);
                for t in 0..t_count {
                    let base = t * (d + 1);
                    for l in 0..d {
                        row[base + l] = wbar[t] * s[l];
                    }
                    row[base + d] = wbar[t];
                }
                rls_update(
                    &mut theta,
                    &mut cov,
                    &row,
                    targets[i],
                    cfg.rls_forgetting,
                    cfg.rls_init_cov,
                );
            }
            for t in 0..t_count {
                for c in 0..=d {
                    self.consequents[[t, c]] = theta[t * (d + 1) + c];
                }
            }

            // Record RMSE with the fresh consequents.
            let est = self.predict(inputs)?;
            let mut sse = T::zero();
            for i in 0..n {
                let r = est[i] - targets[i];
                sse += r * r;
            }
            let rmse = (sse / T::from_usize_const(n)).sqrt();
            if !rmse.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    detail: "training loss became non-finite".into(),
                });
            }
            rmse_per_epoch.push(rmse);
            epochs_run = epoch + 1;

            // Early stop on a stale 10-epoch window.
            if epoch >= 10 {
                let prev = rmse_per_epoch[epoch - 10];
                let improvement = prev - rmse;
                if improvement < cfg.early_stop_tol * prev.max(T::min_positive_value()) {
                    break;
                }
            }

            // Pass 2: full-batch premise gradient with warmed-up momentum.
            let grad = self.premise_gradient(inputs, targets);
            let warm = T::one().min(
                T::from_usize_const(epoch + 1) / T::from_usize_const(MOMENTUM_WARMUP_EPOCHS),
            );
            let step = cfg.lr / T::from_usize_const(n);
            let mut premise = self.premise_vector();
            for j in 0..premise.len() {
                velocity[j] = beta * warm * velocity[j] - step * grad[j];
                premise[j] += velocity[j];
            }
            // Project widths and slopes back to the valid region.
            for mf_chunk in premise.chunks_exact_mut(3) {
                mf_chunk[0] = mf_chunk[0].max(clamp_floor);
                mf_chunk[1] = mf_chunk[1].max(clamp_floor);
            }
            self.set_premise_vector(&premise)?;
        }

        Ok(FitReport {
            rmse_per_epoch,
            epochs_run,
            premise: self.premise_vector(),
            consequents: self.consequents.clone(),
        })
    }

    /// Gradient of the sum of squared residuals with respect to the
    /// flattened premise vector, by backpropagation through the network.
    pub fn premise_gradient(&self, inputs: &ArrayView2<T>, targets: &ArrayView1<T>) -> Vec<T> {
        let n = inputs.nrows();
        let d = self.d;
        let t_count = self.rule_count();
        let two = T::from_f64_const(2.0);
        let mut grad = vec![T::zero(); 6 * d];

        for i in 0..n {
            let s = inputs.row(i);
            // Forward pass, keeping the unnormalized strengths.
            let mut mu = vec![T::zero(); MFS_PER_DIM * d];
            for l in 0..d {
                for k in 0..MFS_PER_DIM {
                    mu[MFS_PER_DIM * l + k] = self.mfs[MFS_PER_DIM * l + k].mu(s[l]);
                }
            }
            let mut w = vec![T::one(); t_count];
            for (t, wt) in w.iter_mut().enumerate() {
                for l in 0..d {
                    *wt *= mu[MFS_PER_DIM * l + ((t >> l) & 1)];
                }
            }
            let total: T = w.iter().fold(T::zero(), |a, &v| a + v);
            let mut z = vec![T::zero(); t_count];
            let mut est = T::zero();
            for t in 0..t_count {
                let mut zt = self.consequents[[t, d]];
                for l in 0..d {
                    zt += self.consequents[[t, l]] * s[l];
                }
                z[t] = zt;
                est += w[t] / total * zt;
            }
            let resid_scale = two * (est - targets[i]);

            // ∂E/∂w_t = resid_scale · (z_t − est)/Σw.
            let mut dw = vec![T::zero(); t_count];
            for t in 0..t_count {
                dw[t] = resid_scale * (z[t] - est) / total;
            }

            for l in 0..d {
                for k in 0..MFS_PER_DIM {
                    let m = mu[MFS_PER_DIM * l + k];
                    // Chain through every rule that uses this MF.
                    let mut dmu = T::zero();
                    for (t, &dwt) in dw.iter().enumerate() {
                        if (t >> l) & 1 == k {
                            dmu += dwt * w[t] / m;
                        }
                    }
                    let mf = &self.mfs[MFS_PER_DIM * l + k];
                    let sv = s[l];
                    if sv == mf.g {
                        // All three partials vanish at the center.
                        continue;
                    }
                    let wdiff = (sv - mf.g) / mf.e;
                    let u = wdiff * wdiff;
                    let q = u.powf(mf.f);
                    let de = two * mf.f * q * m * m / mf.e;
                    let dg = two * mf.f * m * m * q / (sv - mf.g);
                    let df = -(m * m) * q * u.ln();
                    let base = 3 * (MFS_PER_DIM * l + k);
                    grad[base] += dmu * de;
                    grad[base + 1] += dmu * df;
                    grad[base + 2] += dmu * dg;
                }
            }
        }
        grad
    }
}

/// One recursive-least-squares update step.
///
/// If the innovation variance loses positivity (covariance no longer
/// positive-definite after rounding), the covariance is reinitialized and
/// the step retried, with a warning.
pub fn rls_update<T: Scalar>(
    theta: &mut [T],
    cov: &mut Array2<T>,
    row: &[T],
    target: T,
    forgetting: T,
    init_cov: T,
) {
    let p = theta.len();
    let compute = |cov: &Array2<T>| {
        let mut px = vec![T::zero(); p];
        for r in 0..p {
            let mut acc = T::zero();
            for c in 0..p {
                acc += cov[[r, c]] * row[c];
            }
            px[r] = acc;
        }
        let mut denom = forgetting;
        for c in 0..p {
            denom += row[c] * px[c];
        }
        (px, denom)
    };
    let (mut px, mut denom) = compute(cov);
    if !(denom > T::zero()) {
        log::warn!("RLS covariance lost positive-definiteness; reinitializing");
        *cov = Array2::eye(p);
        cov.mapv_inplace(|v| v * init_cov);
        let redo = compute(cov);
        px = redo.0;
        denom = redo.1;
    }
    let mut err = target;
    for c in 0..p {
        err -= row[c] * theta[c];
    }
    for r in 0..p {
        let gain = px[r] / denom;
        theta[r] += gain * err;
    }
    for r in 0..p {
        for c in 0..p {
            cov[[r, c]] = (cov[[r, c]] - px[r] * px[c] / denom) / forgetting;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array2};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn uniform_inputs(rng: &mut ChaCha20Rng, n: usize, d: usize, lo: f64, hi: f64) -> Array2<f64> {
        let mut x = Array2::zeros((n, d));
        for v in x.iter_mut() {
            *v = rng.random_range(lo..hi);
        }
        x
    }

    #[test]
    fn rule_count_and_parameter_shapes() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let x = uniform_inputs(&mut rng, 30, 4, 0.0, 1.0);
        let rb = RuleBase::init(&x.view()).unwrap();
        assert_eq!(rb.rule_count(), 16);
        assert_eq!(rb.premise_vector().len(), 24);
        assert_eq!(rb.consequents.dim(), (16, 5));
    }

    #[test]
    fn initialization_places_percentile_centers() {
        // 101 evenly spaced values on [0, 1]: the 25th/75th percentiles and
        // the range are exact, so the initialization rule is checkable to
        // machine precision.
        let n = 101;
        let mut x = Array2::zeros((n, 1));
        for i in 0..n {
            x[[i, 0]] = i as f64 / (n - 1) as f64;
        }
        let rb = RuleBase::init(&x.view()).unwrap();
        assert_abs_diff_eq!(rb.mfs[0].g, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(rb.mfs[1].g, 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(rb.mfs[0].e, 0.25, epsilon = 1e-15);
        assert_eq!(rb.mfs[0].f, 2.0);
        assert!(rb.consequents.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn constant_dimension_is_rejected_by_name() {
        let mut x = Array2::zeros((10, 3));
        for i in 0..10 {
            x[[i, 0]] = i as f64;
            x[[i, 1]] = 7.0;
            x[[i, 2]] = -(i as f64);
        }
        let err = RuleBase::<f64>::init(&x.view()).unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry(_)));
        assert!(err.to_string().contains("dimension 1"), "got: {err}");
    }

    #[test]
    fn bell_is_one_at_center_and_half_at_one_width() {
        for &f in &[0.7, 2.0, 5.0] {
            let mf = BellMF { e: 0.4, f, g: 1.3 };
            assert_eq!(mf.mu(1.3), 1.0);
            assert_abs_diff_eq!(mf.mu(1.3 + 0.4), 0.5, epsilon = 1e-15);
            assert_abs_diff_eq!(mf.mu(1.3 - 0.4), 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn identical_consequents_collapse_to_identity() {
        // d=1 with equal consequent rows [1, 0]: the output is a convex
        // combination of equal values, i.e. the input itself.
        let rb = RuleBase {
            d: 1,
            mfs: vec![
                BellMF { e: 0.5, f: 2.0, g: 0.2 },
                BellMF { e: 0.5, f: 2.0, g: 0.8 },
            ],
            consequents: array![[1.0, 0.0], [1.0, 0.0]],
        };
        for &s in &[0.0, 0.3, 0.77, 1.0] {
            let (est, wbar) = rb.forward(&array![s].view()).unwrap();
            assert_abs_diff_eq!(est, s, epsilon = 1e-15);
            assert_abs_diff_eq!(wbar.sum(), 1.0, epsilon = 1e-15);
        }
    }

    fn random_rulebase(rng: &mut ChaCha20Rng, d: usize) -> RuleBase<f64> {
        let mut mfs = Vec::new();
        for _ in 0..d {
            for _ in 0..MFS_PER_DIM {
                mfs.push(BellMF {
                    e: rng.random_range(0.1..2.0),
                    f: rng.random_range(0.5..4.0),
                    g: rng.random_range(-1.0..1.0),
                });
            }
        }
        let t = 1 << d;
        let mut c = Array2::zeros((t, d + 1));
        for v in c.iter_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
        RuleBase { d, mfs, consequents: c }
    }

    #[test]
    fn normalized_weights_partition_unity() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        for d in 1..=6 {
            for _ in 0..50 {
                let rb = random_rulebase(&mut rng, d);
                let s: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
                let (_, wbar) = rb.forward(&Array1::from(s).view()).unwrap();
                assert_abs_diff_eq!(wbar.sum(), 1.0, epsilon = 1e-12);
                assert!(wbar.iter().all(|&w| w >= 0.0));
            }
        }
    }

    #[test]
    fn underflowing_products_fall_back_to_log_domain() {
        // Inputs so far from every center that the product of memberships
        // underflows; the normalized weights must still sum to 1.
        let mut mfs = Vec::new();
        for _ in 0..6 {
            mfs.push(BellMF { e: 1e-3, f: 40.0, g: 0.0 });
            mfs.push(BellMF { e: 1e-3, f: 40.0, g: 0.1 });
        }
        let rb = RuleBase {
            d: 6,
            mfs,
            consequents: Array2::ones((64, 7)),
        };
        let s = Array1::from_elem(6, 5.0e3_f64);
        let (est, wbar) = rb.forward(&s.view()).unwrap();
        assert!(est.is_finite());
        assert_abs_diff_eq!(wbar.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let h = 1e-6;
        for _ in 0..25 {
            let d = rng.random_range(1..4usize);
            let mut rb = random_rulebase(&mut rng, d);
            let x = uniform_inputs(&mut rng, 3, d, -1.5, 1.5);
            let y: Array1<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();

            let analytic = rb.premise_gradient(&x.view(), &y.view());
            let base = rb.premise_vector();
            let sse = |rb: &RuleBase<f64>| -> f64 {
                let est = rb.predict(&x.view()).unwrap();
                est.iter()
                    .zip(y.iter())
                    .map(|(e, t)| (e - t) * (e - t))
                    .sum()
            };
            for j in 0..base.len() {
                let mut plus = base.clone();
                plus[j] += h;
                rb.set_premise_vector(&plus).unwrap();
                let fp = sse(&rb);
                let mut minus = base.clone();
                minus[j] -= h;
                rb.set_premise_vector(&minus).unwrap();
                let fm = sse(&rb);
                rb.set_premise_vector(&base).unwrap();
                let numeric = (fp - fm) / (2.0 * h);
                let scale = analytic[j].abs().max(numeric.abs()).max(1e-8);
                assert!(
                    (analytic[j] - numeric).abs() / scale <= 1e-4,
                    "param {j}: analytic {} vs numeric {numeric}",
                    analytic[j]
                );
            }
        }
    }

    #[test]
    fn one_rls_sweep_matches_direct_least_squares() {
        // Well-conditioned random regression; with no forgetting and a huge
        // initial covariance, one sweep must agree with the normal
        // equations.
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..5 {
            let n = 60;
            let p = 6;
            let x = uniform_inputs(&mut rng, n, p, -1.0, 1.0);
            let y: Array1<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();

            let mut theta = vec![0.0; p];
            let mut cov = Array2::eye(p) * 1e8;
            for i in 0..n {
                let row: Vec<f64> = x.row(i).to_vec();
                rls_update(&mut theta, &mut cov, &row, y[i], 1.0, 1e8);
            }

            let xtx = x.t().dot(&x);
            let xty = x.t().dot(&y);
            let direct = linalg::solve(&xtx.view(), &xty.view()).unwrap();
            for j in 0..p {
                let scale = direct[j].abs().max(1e-6);
                assert!(
                    (theta[j] - direct[j]).abs() / scale <= 1e-6,
                    "coefficient {j}: rls {} vs direct {}",
                    theta[j],
                    direct[j]
                );
            }
        }
    }

    #[test]
    fn consequents_recover_generating_rulebase_in_one_epoch() {
        // Targets produced by a known rule base; fitting from its premise
        // with zeroed consequents is pure linear least squares, solved
        // exactly by the first consequent pass.
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let x = uniform_inputs(&mut rng, 80, 2, -1.0, 1.0);
        let gen = random_rulebase(&mut rng, 2);
        let y = gen.predict(&x.view()).unwrap();

        let mut rb = gen.clone();
        rb.consequents.fill(0.0);
        let cfg = TrainConfig {
            epochs: 1,
            rls_init_cov: 1e10,
            early_stop_tol: 1e-15,
            ..TrainConfig::default()
        };
        let report = rb.fit(&x.view(), &y.view(), &cfg).unwrap();
        assert_eq!(report.epochs_run, 1);
        assert!(
            report.rmse_per_epoch[0] < 1e-6,
            "first-epoch RMSE {}",
            report.rmse_per_epoch[0]
        );
    }

    #[test]
    fn constant_targets_are_reproduced_exactly() {
        let mut rng = ChaCha20Rng::seed_from_u64(19);
        let x = uniform_inputs(&mut rng, 40, 1, 0.0, 2.0);
        let y = Array1::from_elem(40, 3.0);
        let mut rb = RuleBase::init(&x.view()).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            rls_init_cov: 1e12,
            early_stop_tol: 1e-15,
            ..TrainConfig::default()
        };
        let report = rb.fit(&x.view(), &y.view(), &cfg).unwrap();
        assert!(
            report.rmse_per_epoch[0] < 1e-10,
            "RMSE {}",
            report.rmse_per_epoch[0]
        );
        let est = rb.predict(&x.view()).unwrap();
        for &e in est.iter() {
            assert_abs_diff_eq!(e, 3.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn training_error_decreases_on_smooth_surface() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let x = uniform_inputs(&mut rng, 100, 2, -1.0, 1.0);
        let y: Array1<f64> = (0..100)
            .map(|i| (3.0 * x[[i, 0]]).sin() * (3.0 * x[[i, 1]]).cos())
            .collect();
        let mut rb = RuleBase::init(&x.view()).unwrap();
        let cfg = TrainConfig {
            epochs: 25,
            lr: 0.5,
            early_stop_tol: 1e-15,
            ..TrainConfig::default()
        };
        let report = rb.fit(&x.view(), &y.view(), &cfg).unwrap();
        for i in 1..20 {
            assert!(
                report.rmse_per_epoch[i] < report.rmse_per_epoch[i - 1],
                "RMSE rose at epoch {i}: {} -> {}",
                report.rmse_per_epoch[i - 1],
                report.rmse_per_epoch[i]
            );
        }
    }

    #[test]
    fn batch_prediction_matches_forward_and_permutes() {
        let mut rng = ChaCha20Rng::seed_from_u64(23);
        let rb = random_rulebase(&mut rng, 3);
        let x = uniform_inputs(&mut rng, 10, 3, -1.0, 1.0);
        let batch = rb.predict(&x.view()).unwrap();
        for i in 0..10 {
            let (single, _) = rb.forward(&x.row(i)).unwrap();
            assert_eq!(single.to_bits(), batch[i].to_bits());
        }
        // Reversing rows reverses outputs.
        let mut rev = x.clone();
        for i in 0..10 {
            rev.row_mut(i).assign(&x.row(9 - i));
        }
        let rev_pred = rb.predict(&rev.view()).unwrap();
        for i in 0..10 {
            assert_eq!(rev_pred[i].to_bits(), batch[9 - i].to_bits());
        }
        // Empty batch.
        let empty = Array2::<f64>::zeros((0, 3));
        assert_eq!(rb.predict(&empty.view()).unwrap().len(), 0);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(29);
        let rb = random_rulebase(&mut rng, 2);
        let s = array![f64::NAN, 0.0];
        assert!(matches!(rb.forward(&s.view()), Err(Error::Data(_))));
    }

    #[test]
    fn rulebase_round_trips_through_json() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let rb = random_rulebase(&mut rng, 3);
        let json = serde_json::to_string(&rb).unwrap();
        let back: RuleBase<f64> = serde_json::from_str(&json).unwrap();
        let x = uniform_inputs(&mut rng, 5, 3, -1.0, 1.0);
        let a = rb.predict(&x.view()).unwrap();
        let b = back.predict(&x.view()).unwrap();
        for (u, v) in a.iter().zip(b.iter()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn rule_dump_lists_every_rule() {
        let mut rng = ChaCha20Rng::seed_from_u64(37);
        let rb = random_rulebase(&mut rng, 2);
        let dump = rb.describe();
        assert!(dump.contains("rule   1: IF s1 IS low AND s2 IS low"));
        assert!(dump.contains("rule   4: IF s1 IS high AND s2 IS high"));
        assert_eq!(dump.matches("THEN").count(), 4);
    }

    #[test]
    fn forgetting_factor_outside_range_is_rejected() {
        let cfg = TrainConfig::<f64> {
            rls_forgetting: 0.85,
            ..TrainConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = TrainConfig::<f64> {
            rls_forgetting: 1.05,
            ..TrainConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
