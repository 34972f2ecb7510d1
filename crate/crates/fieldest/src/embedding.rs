//! Neighborhood-preserving embedding of covariate rows.
//!
//! Covariate rows live in 3m+2 dimensions; this module compresses them to a
//! small `d`-dimensional basis that keeps near rows near. The pipeline is:
//!
//! 1. [`build_fuzzy_graph`] — convert each point's m covariate-space
//!    neighbor distances into membership weights `exp(−(d − ρ)/σ)`, with σ
//!    calibrated per point so the weights sum to log₂(m), then symmetrize
//!    with the probabilistic t-conorm `a + b − ab`.
//! 2. [`fit_curve`] — fit the low-dimensional kernel `Ψ(t) = 1/(1 + a·t^2b)`
//!    to an exponential target controlled by `min_dist` and `spread`.
//! 3. [`optimize_embedding`] — spectral initialization from the symmetrized
//!    graph Laplacian, refined by per-edge stochastic gradient descent with
//!    negative sampling against the fuzzy-set cross entropy.
//! 4. [`SdbModel::transform`] — out-of-sample queries embed at the kernel-
//!    weighted barycenter of their m nearest training rows' coordinates.

use crate::error::{Error, Result};
use crate::linalg;
use crate::observations::{CovariateMatrix, NeighborGraph};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One undirected graph edge with its symmetrized membership weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SymEdge<T: Scalar> {
    pub i: usize,
    pub j: usize,
    pub weight: T,
}

/// Fuzzy membership graph over covariate-space neighbor distances.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FuzzyGraph<T: Scalar> {
    pub m: usize,
    /// N×m directed weights; row i follows the spatial neighbor order.
    pub w: Array2<T>,
    /// Per-point distance to the nearest covariate-space neighbor.
    pub rho: Array1<T>,
    /// Per-point calibration scale found by binary search.
    pub sigma: Array1<T>,
    /// Symmetrized undirected edges, sorted by (i, j) with i < j.
    pub edges: Vec<SymEdge<T>>,
}

/// The low-dimensional kernel `Ψ(t) = 1 / (1 + a·t^(2b))`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EmbeddingCurve<T: Scalar> {
    pub a: T,
    pub b: T,
}

impl<T: Scalar> EmbeddingCurve<T> {
    /// Evaluate the kernel at distance `t ≥ 0`.
    pub fn psi(&self, t: T) -> T {
        let two = T::from_f64_const(2.0);
        T::one() / (T::one() + self.a * t.powf(two * self.b))
    }
}

/// Settings for the embedding optimizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EmbeddingConfig<T: Scalar> {
    /// Target dimensionality of the embedded basis.
    pub d: usize,
    /// SGD epochs over the edge set.
    pub n_epochs: usize,
    /// Initial SGD learning rate, decayed linearly to zero.
    pub initial_lr: T,
    /// Distances below this embed at kernel value ≈ 1.
    pub min_dist: T,
    /// Decay scale of the kernel target beyond `min_dist`.
    pub spread: T,
    /// Random repulsions sampled per attractive update.
    pub negative_sample_rate: usize,
    pub rng_seed: u64,
}

impl<T: Scalar> Default for EmbeddingConfig<T> {
    fn default() -> Self {
        Self {
            d: 4,
            n_epochs: 500,
            initial_lr: T::one(),
            min_dist: T::from_f64_const(0.1),
            spread: T::one(),
            negative_sample_rate: 5,
            rng_seed: 0,
        }
    }
}

impl<T: Scalar> EmbeddingConfig<T> {
    /// Check the config is internally consistent.
    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::Config("embedding dimension d must be ≥ 1".into()));
        }
        if self.n_epochs == 0 {
            return Err(Error::Config("n_epochs must be positive".into()));
        }
        if self.negative_sample_rate == 0 {
            return Err(Error::Config("negative_sample_rate must be positive".into()));
        }
        if !(self.initial_lr > T::zero()) {
            return Err(Error::Config("initial_lr must be positive".into()));
        }
        if !(self.min_dist > T::zero()) || !(self.spread > T::zero()) {
            return Err(Error::Config("min_dist and spread must be positive".into()));
        }
        Ok(())
    }
}

/// Trained embedding: the basis coordinates of the training rows plus
/// everything needed to place new query rows without refitting.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SdbModel<T: Scalar> {
    pub d: usize,
    /// N×d embedded coordinates of the training covariate rows.
    pub y: Array2<T>,
    pub graph: FuzzyGraph<T>,
    pub curve: EmbeddingCurve<T>,
    /// Training covariates (and their scaling), retained for transforms.
    pub train_covariates: CovariateMatrix<T>,
    pub rng_seed: u64,
}

/// Euclidean distance between two equal-length rows.
fn row_distance<T: Scalar>(a: &ArrayView1<T>, b: &ArrayView1<T>) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc.sqrt()
}

/// Membership sum `Σ exp(−max(d − ρ, 0)/σ)` used by the calibration search.
fn membership_sum<T: Scalar>(dists: &[T], rho: T, sigma: T) -> T {
    let sigma = sigma.max(T::min_positive_value());
    let mut acc = T::zero();
    for &d in dists {
        let delta = (d - rho).max(T::zero());
        acc += (-delta / sigma).exp();
    }
    acc
}

/// Binary-search σ so the membership sum hits `target` (64 iterations).
///
/// The sum grows monotonically with σ, from the count of zero-offset
/// neighbors toward the neighbor count, so bisection on an upward-doubled
/// bracket converges; when the target is unreachable (e.g. every distance
/// equals ρ) the search pegs at a bound and the caller's sum lands as close
/// as the geometry allows.
fn calibrate_sigma<T: Scalar>(dists: &[T], rho: T, target: T) -> T {
    let mut lo = T::zero();
    let mut hi = T::one();
    let cap = T::from_f64_const(1e12);
    let mut doublings = 0;
    while membership_sum(dists, rho, hi) < target && hi < cap && doublings < 64 {
        hi = hi * T::from_f64_const(2.0);
        doublings += 1;
    }
    let half = T::from_f64_const(0.5);
    for _ in 0..64 {
        let mid = half * (lo + hi);
        if membership_sum(dists, rho, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    half * (lo + hi)
}

/// Convert neighbor distances to calibrated fuzzy weights and symmetrize.
///
/// Distances are recomputed in full covariate space between each row and its
/// spatial-graph neighbors. `W_ij = exp(−(d − ρ_i)/σ_i)` with `W := 1`
/// whenever `d ≤ ρ_i`, σ_i calibrated so each row sums to log₂(m); the
/// undirected weight of a pair is `W_ij + W_ji − W_ij·W_ji`.
pub fn build_fuzzy_graph<T: Scalar>(
    cov: &CovariateMatrix<T>,
    graph: &NeighborGraph<T>,
) -> Result<FuzzyGraph<T>> {
    let n = cov.rows.nrows();
    let m = graph.m;
    if graph.indices.nrows() != n {
        return Err(Error::Config(format!(
            "covariate matrix has {n} rows but neighbor graph has {}",
            graph.indices.nrows()
        )));
    }
    let first = cov.rows.row(0);
    if (1..n).all(|i| cov.rows.row(i) == first) {
        return Err(Error::DegenerateGeometry(
            "all covariate rows are identical; no neighborhood structure exists".into(),
        ));
    }

    let target = T::from_usize_const(m).log2();
    let mut w = Array2::zeros((n, m));
    let mut rho = Array1::zeros(n);
    let mut sigma = Array1::zeros(n);
    let floor = T::min_positive_value();

    for i in 0..n {
        let row = cov.rows.row(i);
        let dists: Vec<T> = (0..m)
            .map(|k| row_distance(&row, &cov.rows.row(graph.indices[[i, k]])))
            .collect();
        let r = dists.iter().fold(T::infinity(), |a, &d| a.min(d));
        let s = calibrate_sigma(&dists, r, target);
        rho[i] = r;
        sigma[i] = s;
        let s_safe = s.max(floor);
        for (k, &d) in dists.iter().enumerate() {
            w[[i, k]] = if d <= r {
                T::one()
            } else {
                ((-(d - r)) / s_safe).exp().max(floor)
            };
        }
    }

    // Symmetrize with the probabilistic t-conorm, one entry per pair.
    let mut sym: BTreeMap<(usize, usize), T> = BTreeMap::new();
    for i in 0..n {
        for k in 0..m {
            let j = graph.indices[[i, k]];
            let key = (i.min(j), i.max(j));
            let entry = sym.entry(key).or_insert_with(T::zero);
            let a = *entry;
            let b = w[[i, k]];
            *entry = a + b - a * b;
        }
    }
    let edges = sym
        .into_iter()
        .map(|((i, j), weight)| SymEdge { i, j, weight })
        .collect();

    Ok(FuzzyGraph {
        m,
        w,
        rho,
        sigma,
        edges,
    })
}

/// The target kernel the embedding curve is fitted against.
fn curve_target<T: Scalar>(t: T, min_dist: T, spread: T) -> T {
    if t <= min_dist {
        T::one()
    } else {
        (-(t - min_dist) / spread).exp()
    }
}

/// Fit `Ψ(t) = 1/(1 + a·t^(2b))` to the exponential target curve.
///
/// 300 sample points on `(0, 3·spread]`; a coarse grid seeds a damped
/// Gauss–Newton refinement that stops when the sum-of-squares gradient
/// drops below 1e-8 (or a few machine epsilons for narrower scalars).
/// Failing to converge within 200 iterations is an error carrying the
/// residual norm.
pub fn fit_curve<T: Scalar>(min_dist: T, spread: T) -> Result<EmbeddingCurve<T>> {
    let three = T::from_f64_const(3.0);
    if !(min_dist > T::zero()) || !(spread > T::zero()) || min_dist >= three * spread {
        return Err(Error::Config(format!(
            "curve fit needs 0 < min_dist < 3·spread, got min_dist {min_dist}, spread {spread}"
        )));
    }

    const SAMPLES: usize = 300;
    let mut ts = Vec::with_capacity(SAMPLES);
    let mut target = Vec::with_capacity(SAMPLES);
    for k in 0..SAMPLES {
        let t = three * spread * T::from_usize_const(k + 1) / T::from_usize_const(SAMPLES);
        ts.push(t);
        target.push(curve_target(t, min_dist, spread));
    }

    let sse = |a: T, b: T| {
        let curve = EmbeddingCurve { a, b };
        let mut acc = T::zero();
        for (&t, &g) in ts.iter().zip(target.iter()) {
            let r = curve.psi(t) - g;
            acc += r * r;
        }
        acc
    };

    // Coarse grid over plausible (a, b) to seed the refinement.
    let mut best = (T::infinity(), T::one(), T::one());
    for ai in 0..64 {
        // Log-spaced a ∈ [0.05, 10].
        let a = T::from_f64_const(0.05 * (10.0f64 / 0.05).powf(ai as f64 / 63.0));
        for bi in 0..48 {
            let b = T::from_f64_const(0.1 + (3.0 - 0.1) * bi as f64 / 47.0);
            let e = sse(a, b);
            if e < best.0 {
                best = (e, a, b);
            }
        }
    }
    let (mut err, mut a, mut b) = best;

    let two = T::from_f64_const(2.0);
    let tol = T::from_f64_const(1e-8).max(T::epsilon() * T::from_f64_const(32.0));
    let min_param = T::from_f64_const(1e-8);

    for _ in 0..200 {
        // Residuals r_k = Ψ(t_k) − g_k and the 2-column Jacobian.
        let mut jtj = [[T::zero(); 2]; 2];
        let mut jtr = [T::zero(); 2];
        for (&t, &g) in ts.iter().zip(target.iter()) {
            let t2b = t.powf(two * b);
            let denom = T::one() + a * t2b;
            let psi = T::one() / denom;
            let r = psi - g;
            let d_denom = denom * denom;
            let da = -t2b / d_denom;
            let db = -two * a * t2b * t.ln() / d_denom;
            jtj[0][0] += da * da;
            jtj[0][1] += da * db;
            jtj[1][1] += db * db;
            jtr[0] += da * r;
            jtr[1] += db * r;
        }
        jtj[1][0] = jtj[0][1];

        if jtr[0].abs().max(jtr[1].abs()) < tol {
            return Ok(EmbeddingCurve { a, b });
        }

        // Solve the 2×2 normal equations directly.
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det.abs() < T::min_positive_value() {
            break;
        }
        let delta_a = (-jtr[0] * jtj[1][1] + jtr[1] * jtj[0][1]) / det;
        let delta_b = (-jtr[1] * jtj[0][0] + jtr[0] * jtj[1][0]) / det;

        // Backtrack if the full step overshoots.
        let mut step = T::one();
        let mut improved = false;
        for _ in 0..24 {
            let na = (a + step * delta_a).max(min_param);
            let nb = (b + step * delta_b).max(min_param);
            let ne = sse(na, nb);
            if ne < err {
                a = na;
                b = nb;
                err = ne;
                improved = true;
                break;
            }
            step = step * T::from_f64_const(0.5);
        }
        if !improved {
            // Stuck at a numerical floor; accept if the gradient is small.
            if jtr[0].abs().max(jtr[1].abs()) < tol * T::from_f64_const(1e3) {
                return Ok(EmbeddingCurve { a, b });
            }
            break;
        }
    }

    let residual = err.to_f64().unwrap_or(f64::NAN).sqrt();
    Err(Error::CurveFit { residual })
}

/// Spectral layout from the symmetric normalized Laplacian of the edge set.
///
/// Returns the eigenvector columns for the d smallest non-trivial
/// eigenvalues, rescaled to max-abs 10, or an error if the eigensolver
/// fails (the caller falls back to a seeded random layout).
pub fn spectral_init<T: Scalar>(n: usize, edges: &[SymEdge<T>], d: usize) -> Result<Array2<T>> {
    let mut adj = Array2::zeros((n, n));
    for e in edges {
        adj[[e.i, e.j]] = e.weight;
        adj[[e.j, e.i]] = e.weight;
    }
    let mut deg_inv_sqrt = Array1::zeros(n);
    for i in 0..n {
        let deg = adj.row(i).sum();
        deg_inv_sqrt[i] = if deg > T::zero() {
            T::one() / deg.sqrt()
        } else {
            T::zero()
        };
    }
    let mut lap = Array2::eye(n);
    for i in 0..n {
        for j in 0..n {
            lap[[i, j]] -= deg_inv_sqrt[i] * adj[[i, j]] * deg_inv_sqrt[j];
        }
    }
    let (_, vectors) = linalg::symmetric_eigen(&lap.view())?;
    let mut y: Array2<T> = Array2::zeros((n, d));
    for c in 0..d {
        for r in 0..n {
            y[[r, c]] = vectors[[r, c + 1]];
        }
    }
    let max_abs = y.iter().fold(T::zero(), |m: T, &v| m.max(v.abs()));
    if !(max_abs > T::zero()) || !max_abs.is_finite() {
        return Err(Error::Numerical(
            "spectral layout collapsed to zero".into(),
        ));
    }
    let scale = T::from_f64_const(10.0) / max_abs;
    y.mapv_inplace(|v| v * scale);
    Ok(y)
}

/// Fuzzy-set cross entropy of the embedding against the graph edges.
///
/// `Σ w·ln(w/μ) + (1−w)·ln((1−w)/(1−μ))` with `μ = Ψ(‖y_i − y_j‖)`,
/// each factor clamped away from 0 and 1 for finiteness. Zero exactly
/// when every edge's kernel value matches its graph weight.
pub fn edge_cross_entropy<T: Scalar>(
    graph: &FuzzyGraph<T>,
    curve: &EmbeddingCurve<T>,
    y: &Array2<T>,
) -> T {
    let eps = T::from_f64_const(1e-12);
    let one = T::one();
    let mut acc = T::zero();
    for e in &graph.edges {
        let dist = row_distance(&y.row(e.i), &y.row(e.j));
        let mu = curve.psi(dist).max(eps).min(one - eps);
        let w = e.weight.max(eps).min(one - eps);
        acc += w * (w / mu).ln() + (one - w) * ((one - w) / (one - mu)).ln();
    }
    acc
}

/// Optimize the embedding and assemble the reusable model.
///
/// Coordinates start from the spectral layout (seeded uniform in
/// `[−10, 10]^d` if the eigensolve fails) and are refined by sampled
/// attraction along edges — more often for heavier edges — plus random
/// repulsion, with per-component gradient clipping at ±4 and a linearly
/// decaying learning rate. Fully deterministic for a fixed `rng_seed`.
pub fn optimize_embedding<T: Scalar>(
    graph: &FuzzyGraph<T>,
    cov: &CovariateMatrix<T>,
    cfg: &EmbeddingConfig<T>,
) -> Result<SdbModel<T>> {
    cfg.validate()?;
    let n = cov.rows.nrows();
    let width = cov.rows.ncols();
    if cfg.d >= width {
        return Err(Error::Config(format!(
            "embedding dimension {} must be below the covariate width {width}",
            cfg.d
        )));
    }
    if n < 2 {
        return Err(Error::InsufficientData(
            "embedding needs at least 2 rows".into(),
        ));
    }

    let curve = fit_curve(cfg.min_dist, cfg.spread)?;
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.rng_seed);

    let mut y = match spectral_init(n, &graph.edges, cfg.d) {
        Ok(y) => y,
        Err(err) => {
            log::warn!("spectral initialization failed ({err}); using seeded random layout");
            let mut y = Array2::zeros((n, cfg.d));
            for v in y.iter_mut() {
                *v = T::from_f64_const(rng.random_range(-10.0..10.0));
            }
            y
        }
    };

    // Heavier edges are sampled more often: edge e fires every
    // w_max/w_e epochs; edges too weak to fire even once are dropped.
    let w_max = graph
        .edges
        .iter()
        .fold(T::zero(), |m, e| m.max(e.weight));
    let threshold = w_max / T::from_usize_const(cfg.n_epochs);
    let active: Vec<&SymEdge<T>> = graph
        .edges
        .iter()
        .filter(|e| e.weight >= threshold)
        .collect();
    let epochs_per_sample: Vec<T> = active.iter().map(|e| w_max / e.weight).collect();
    let mut next_due = epochs_per_sample.clone();

    let clip = T::from_f64_const(4.0);
    let two = T::from_f64_const(2.0);
    let (a, b) = (curve.a, curve.b);

    for epoch in 0..cfg.n_epochs {
        let lr = cfg.initial_lr
            * (T::one() - T::from_usize_const(epoch) / T::from_usize_const(cfg.n_epochs));
        let due_limit = T::from_usize_const(epoch + 1);
        for (e_idx, edge) in active.iter().enumerate() {
            if next_due[e_idx] > due_limit {
                continue;
            }
            let (i, j) = (edge.i, edge.j);
            // Attraction along the edge; both endpoints move.
            let mut d2 = T::zero();
            for c in 0..cfg.d {
                let diff = y[[i, c]] - y[[j, c]];
                d2 += diff * diff;
            }
            if d2 > T::zero() {
                let coeff = (-two * a * b * d2.powf(b - T::one()))
                    / (T::one() + a * d2.powf(b));
                for c in 0..cfg.d {
                    let g = (coeff * (y[[i, c]] - y[[j, c]])).max(-clip).min(clip);
                    y[[i, c]] += lr * g;
                    y[[j, c]] -= lr * g;
                }
            }
            // Random repulsion for the first endpoint only.
            for _ in 0..cfg.negative_sample_rate {
                let k = rng.random_range(0..n);
                if k == i {
                    continue;
                }
                let mut d2 = T::zero();
                for c in 0..cfg.d {
                    let diff = y[[i, c]] - y[[k, c]];
                    d2 += diff * diff;
                }
                if d2 > T::zero() {
                    let coeff = (two * b)
                        / ((T::from_f64_const(0.001) + d2) * (T::one() + a * d2.powf(b)));
                    for c in 0..cfg.d {
                        let g = (coeff * (y[[i, c]] - y[[k, c]])).max(-clip).min(clip);
                        y[[i, c]] += lr * g;
                    }
                }
            }
            next_due[e_idx] += epochs_per_sample[e_idx];
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                detail: "embedding coordinates became non-finite".into(),
            });
        }
    }

    Ok(SdbModel {
        d: cfg.d,
        y,
        graph: graph.clone(),
        curve,
        train_covariates: cov.clone(),
        rng_seed: cfg.rng_seed,
    })
}

impl<T: Scalar> SdbModel<T> {
    /// Embed query covariate rows without refitting.
    ///
    /// Each query finds its m nearest training rows in covariate space and
    /// lands at the weighted barycenter of their embedded coordinates, with
    /// weights from the same calibrated kernel used for the graph. A query
    /// within 1e-12 of a training row returns that row's coordinates
    /// exactly.
    pub fn transform(&self, query_cov: &CovariateMatrix<T>) -> Result<Array2<T>> {
        let q = query_cov.rows.nrows();
        let mut out = Array2::zeros((q, self.d));
        if q == 0 {
            return Ok(out);
        }
        if query_cov.rows.ncols() != self.train_covariates.rows.ncols() {
            return Err(Error::Config(format!(
                "query covariate width {} does not match training width {}",
                query_cov.rows.ncols(),
                self.train_covariates.rows.ncols()
            )));
        }
        let n = self.train_covariates.rows.nrows();
        let m = self.graph.m.min(n);
        let target = T::from_usize_const(self.graph.m).log2();
        let snap = T::from_f64_const(1e-12);

        for qi in 0..q {
            let row = query_cov.rows.row(qi);
            let mut cands: Vec<(usize, T)> = (0..n)
                .map(|i| (i, row_distance(&row, &self.train_covariates.rows.row(i))))
                .collect();
            cands.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite distances"));
            cands.truncate(m);

            if cands[0].1 <= snap {
                let src = cands[0].0;
                for c in 0..self.d {
                    out[[qi, c]] = self.y[[src, c]];
                }
                continue;
            }

            let rho = cands[0].1;
            let dists: Vec<T> = cands.iter().map(|&(_, d)| d).collect();
            let sigma = calibrate_sigma(&dists, rho, target).max(T::min_positive_value());
            let mut weights: Vec<T> = dists
                .iter()
                .map(|&d| ((-((d - rho).max(T::zero()))) / sigma).exp())
                .collect();
            let total = weights.iter().fold(T::zero(), |a, &w| a + w);
            for w in weights.iter_mut() {
                *w = *w / total;
            }
            for (&(idx, _), &w) in cands.iter().zip(weights.iter()) {
                for c in 0..self.d {
                    out[[qi, c]] += w * self.y[[idx, c]];
                }
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "query embedding produced non-finite coordinates".into(),
            ));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observations::{
        build_covariates, build_neighbor_graph, build_query_covariates, Observation,
        ObservationSet,
    };
    use approx::assert_abs_diff_eq;

    /// Deterministic scattered test points with smooth values.
    fn scatter(n: usize) -> ObservationSet<f64> {
        let mut pts = Vec::with_capacity(n);
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..n {
            let x = next() * 10.0;
            let y = next() * 10.0;
            pts.push(Observation {
                x,
                y,
                value: (0.3 * x).sin() + (0.2 * y).cos(),
            });
        }
        ObservationSet::new(pts).unwrap()
    }

    fn graph_for(
        obs: &ObservationSet<f64>,
        m: usize,
    ) -> (CovariateMatrix<f64>, NeighborGraph<f64>) {
        let g = build_neighbor_graph(obs, m).unwrap();
        let cov = build_covariates(obs, &g);
        (cov, g)
    }

    #[test]
    fn nearest_neighbor_weight_is_one() {
        let obs = scatter(30);
        let (cov, g) = graph_for(&obs, 5);
        let fg = build_fuzzy_graph(&cov, &g).unwrap();
        for i in 0..30 {
            let row_max = (0..5).map(|k| fg.w[[i, k]]).fold(0.0f64, f64::max);
            assert_eq!(row_max, 1.0, "row {i} must contain a weight-1 neighbor");
        }
    }

    #[test]
    fn row_sums_calibrate_to_log2_m() {
        let obs = scatter(40);
        let (cov, g) = graph_for(&obs, 8);
        let fg = build_fuzzy_graph(&cov, &g).unwrap();
        let target = 8.0f64.log2();
        for i in 0..40 {
            let sum: f64 = (0..8).map(|k| fg.w[[i, k]]).sum();
            assert!(
                (sum - target).abs() < 1e-4,
                "row {i} sums to {sum}, want {target}"
            );
        }
    }

    #[test]
    fn weights_stay_in_unit_interval_and_edges_dedupe() {
        let obs = scatter(25);
        let (cov, g) = graph_for(&obs, 4);
        let fg = build_fuzzy_graph(&cov, &g).unwrap();
        for &w in fg.w.iter() {
            assert!(w > 0.0 && w <= 1.0);
        }
        for e in &fg.edges {
            assert!(e.i < e.j, "edges stored once with i < j");
            assert!(e.weight > 0.0 && e.weight <= 1.0);
        }
    }

    #[test]
    fn two_neighbor_calibration_pushes_sigma_to_floor() {
        // With m=2 and distances (ρ, ρ+t), the target sum log₂(2)=1 forces
        // the second weight to vanish, so σ collapses to its lower bound.
        let dists = [0.5f64, 1.5];
        let sigma = calibrate_sigma(&dists, 0.5, 1.0);
        assert!(sigma < 1e-10, "sigma was {sigma}");
        assert_abs_diff_eq!(membership_sum(&dists, 0.5, sigma), 1.0, epsilon = 1e-4);
    }

    #[test]
    fn one_sided_edge_keeps_t_conorm_identity() {
        // Points 0,1,3 on a line, m=1: 2→1 is one-directed (1's neighbor is
        // 0), and its symmetrized weight must stay 1 + 0 − 0 = 1.
        let obs = ObservationSet::new(vec![
            Observation { x: 0.0, y: 0.0, value: 1.0 },
            Observation { x: 1.0, y: 0.0, value: 2.0 },
            Observation { x: 3.0, y: 0.0, value: 3.0 },
        ])
        .unwrap();
        let (cov, g) = graph_for(&obs, 1);
        let fg = build_fuzzy_graph(&cov, &g).unwrap();
        let e12 = fg
            .edges
            .iter()
            .find(|e| (e.i, e.j) == (1, 2))
            .expect("edge 1-2 exists");
        assert_abs_diff_eq!(e12.weight, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_rows_are_degenerate() {
        let obs = ObservationSet::new(vec![
            Observation { x: 0.0, y: 0.0, value: 5.0 },
            Observation { x: 1.0, y: 0.0, value: 5.0 },
            Observation { x: 2.0, y: 0.0, value: 5.0 },
        ])
        .unwrap();
        let g = build_neighbor_graph(&obs, 1).unwrap();
        let cov = build_covariates(&obs, &g);
        // Equally spaced collinear points with equal values produce
        // identical normalized rows only if every column is constant; build
        // a truly degenerate matrix directly to pin the error path.
        let mut degenerate = cov.clone();
        for mut row in degenerate.rows.rows_mut() {
            row.fill(0.5);
        }
        assert!(matches!(
            build_fuzzy_graph(&degenerate, &g),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn default_curve_matches_dense_grid_oracle() {
        // Independent brute-force oracle: dense grid over (a, b).
        let fitted = fit_curve(0.1f64, 1.0).unwrap();
        let ts: Vec<f64> = (0..300).map(|k| 3.0 * (k + 1) as f64 / 300.0).collect();
        let target: Vec<f64> = ts
            .iter()
            .map(|&t| if t <= 0.1 { 1.0 } else { (-(t - 0.1)).exp() })
            .collect();
        let sse = |a: f64, b: f64| -> f64 {
            ts.iter()
                .zip(target.iter())
                .map(|(&t, &g)| {
                    let p = 1.0 / (1.0 + a * t.powf(2.0 * b));
                    (p - g) * (p - g)
                })
                .sum()
        };
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for ai in 1..=500 {
            let a = ai as f64 * 0.02; // (0, 10]
            for bi in 1..=300 {
                let b = bi as f64 * 0.01; // (0, 3]
                let e = sse(a, b);
                if e < best.0 {
                    best = (e, a, b);
                }
            }
        }
        assert!(
            (fitted.a - best.1).abs() <= 0.05,
            "a: fitted {} vs oracle {}",
            fitted.a,
            best.1
        );
        assert!(
            (fitted.b - best.2).abs() <= 0.05,
            "b: fitted {} vs oracle {}",
            fitted.b,
            best.2
        );
        // And the known values for the default shape parameters.
        assert_abs_diff_eq!(fitted.a, 1.577, epsilon = 0.05);
        assert_abs_diff_eq!(fitted.b, 0.895, epsilon = 0.05);
    }

    #[test]
    fn curve_is_one_at_zero_and_strictly_decreasing() {
        let curve = fit_curve(0.1f64, 1.0).unwrap();
        assert_eq!(curve.psi(0.0), 1.0);
        let mut prev = curve.psi(1e-9);
        for k in 1..=100 {
            let t = k as f64 * 0.05;
            let v = curve.psi(t);
            assert!(v < prev, "psi must strictly decrease, stalled at t={t}");
            prev = v;
        }
    }

    #[test]
    fn invalid_curve_shape_parameters_are_config_errors() {
        assert!(matches!(fit_curve(-0.1f64, 1.0), Err(Error::Config(_))));
        assert!(matches!(fit_curve(3.5f64, 1.0), Err(Error::Config(_))));
    }

    fn small_model(seed: u64, n_epochs: usize) -> SdbModel<f64> {
        let obs = scatter(24);
        let (cov, g) = graph_for(&obs, 5);
        let fg = build_fuzzy_graph(&cov, &g).unwrap();
        let cfg = EmbeddingConfig {
            d: 2,
            n_epochs,
            rng_seed: seed,
            ..EmbeddingConfig::default()
        };
        optimize_embedding(&fg, &cov, &cfg).unwrap()
    }

    #[test]
    fn same_seed_reproduces_bitwise_identical_coordinates() {
        let m1 = small_model(7, 60);
        let m2 = small_model(7, 60);
        for (a, b) in m1.y.iter().zip(m2.y.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn optimization_reduces_edge_cross_entropy() {
        let obs = scatter(24);
        let (cov, g) = graph_for(&obs, 5);
        let fg = build_fuzzy_graph(&cov, &g).unwrap();
        let cfg = EmbeddingConfig {
            d: 2,
            n_epochs: 100,
            rng_seed: 3,
            ..EmbeddingConfig::default()
        };
        let before = {
            // Loss at the raw spectral layout, i.e. epoch zero.
            let curve = fit_curve(cfg.min_dist, cfg.spread).unwrap();
            let y0 = spectral_init(24, &fg.edges, 2).unwrap();
            edge_cross_entropy(&fg, &curve, &y0)
        };
        let model = optimize_embedding(&fg, &cov, &cfg).unwrap();
        let after = edge_cross_entropy(&fg, &model.curve, &model.y);
        assert!(
            after < before,
            "cross entropy must drop: before {before}, after {after}"
        );
    }

    #[test]
    fn cross_entropy_is_zero_when_kernel_matches_weights() {
        // Analytic identity: every term vanishes at μ = w.
        let w = 0.37f64;
        let mu = 0.37f64;
        let term = w * (w / mu).ln() + (1.0 - w) * ((1.0 - w) / (1.0 - mu)).ln();
        assert_abs_diff_eq!(term, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn transform_returns_training_coordinates_for_training_rows() {
        let model = small_model(11, 60);
        let emb = model.transform(&model.train_covariates).unwrap();
        for (a, b) in emb.iter().zip(model.y.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn transform_averages_symmetric_neighbors() {
        // A query row equidistant from two training rows embeds at the
        // midpoint of their coordinates. Hand-build the model so the
        // equidistance is exact.
        use crate::observations::ColumnScaling;
        use ndarray::array;
        let train = CovariateMatrix {
            rows: array![[0.0, 0.0], [1.0, 0.0]],
            scaling: ColumnScaling {
                lo: Array1::zeros(2),
                hi: Array1::ones(2),
            },
        };
        let model = SdbModel {
            d: 1,
            y: array![[0.0], [4.0]],
            graph: FuzzyGraph {
                m: 2,
                w: Array2::zeros((2, 2)),
                rho: Array1::zeros(2),
                sigma: Array1::zeros(2),
                edges: vec![],
            },
            curve: fit_curve(0.1, 1.0).unwrap(),
            train_covariates: train.clone(),
            rng_seed: 0,
        };
        let query = CovariateMatrix {
            rows: array![[0.5, 0.0]],
            scaling: train.scaling.clone(),
        };
        let emb = model.transform(&query).unwrap();
        assert_abs_diff_eq!(emb[[0, 0]], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn transform_of_empty_query_is_empty() {
        let model = small_model(5, 20);
        let empty = CovariateMatrix {
            rows: Array2::zeros((0, model.train_covariates.rows.ncols())),
            scaling: model.train_covariates.scaling.clone(),
        };
        let out = model.transform(&empty).unwrap();
        assert_eq!(out.dim(), (0, 2));
    }

    #[test]
    fn model_round_trips_through_json_with_identical_transforms() {
        let model = small_model(9, 60);
        let json = serde_json::to_string(&model).unwrap();
        let reloaded: SdbModel<f64> = serde_json::from_str(&json).unwrap();
        let obs = scatter(24);
        let q = build_query_covariates(
            &[(2.5, 3.5), (7.0, 1.0)],
            &obs,
            5,
            &model.train_covariates.scaling,
        )
        .unwrap();
        let e1 = model.transform(&q).unwrap();
        let e2 = reloaded.transform(&q).unwrap();
        for (a, b) in e1.iter().zip(e2.iter()) {
            assert_eq!(a.to_bits(), b.to_bits(), "round-trip must be lossless");
        }
    }

    #[test]
    fn zero_epochs_is_rejected() {
        let cfg = EmbeddingConfig::<f64> {
            n_epochs: 0,
            ..EmbeddingConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
