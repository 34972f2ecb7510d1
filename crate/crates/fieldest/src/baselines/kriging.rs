//! Ordinary kriging over a fitted variogram.

use crate::error::{Error, Result};
use crate::linalg::LuFactors;
use crate::observations::ObservationSet;
use crate::scalar::Scalar;
use ndarray::{Array1, Array2};

use super::variogram::VariogramModel;

/// Predict each query by the ordinary-kriging linear system.
///
/// Weights solve the standard semivariance system with a Lagrange
/// multiplier enforcing Σλ = 1 (unbiasedness), so predictions are exact at
/// data points when the nugget is zero. Values are mean-centered for the
/// solve and restored on output. Returns the per-query kriging variance
/// `Σλᵢ·γ(dᵢ) + μ`, floored at zero against rounding.
///
/// A singular system (e.g. a near-pure-nugget model) is retried once with
/// 1e-10 added to the semivariance diagonal block, with a warning.
pub fn kriging_predict<T: Scalar>(
    obs: &ObservationSet<T>,
    queries: &[(T, T)],
    vgm: &VariogramModel<T>,
) -> Result<(Array1<T>, Array1<T>)> {
    let n = obs.len();
    if n < 2 {
        return Err(Error::InsufficientData(
            "ordinary kriging needs at least 2 observations".into(),
        ));
    }
    let pts = obs.points();

    // Assemble the (n+1)² system: semivariances, bordered by the
    // unbiasedness row/column.
    let mut a = Array2::zeros((n + 1, n + 1));
    for i in 0..n {
        for j in 0..n {
            let dx = pts[i].x - pts[j].x;
            let dy = pts[i].y - pts[j].y;
            a[[i, j]] = vgm.gamma((dx * dx + dy * dy).sqrt());
        }
        a[[i, n]] = T::one();
        a[[n, i]] = T::one();
    }

    let factors = match LuFactors::factor(&a.view()) {
        Ok(f) => f,
        Err(_) => {
            log::warn!(
                "kriging system is singular; retrying with 1e-10 diagonal regularization"
            );
            let bump = T::from_f64_const(1e-10);
            for i in 0..n {
                a[[i, i]] += bump;
            }
            LuFactors::factor(&a.view())?
        }
    };

    let mean = obs
        .values()
        .iter()
        .fold(T::zero(), |s, &v| s + v)
        / T::from_usize_const(n);

    let mut values = Array1::zeros(queries.len());
    let mut variances = Array1::zeros(queries.len());
    let mut rhs = Array1::zeros(n + 1);

    for (qi, &(qx, qy)) in queries.iter().enumerate() {
        if !qx.is_finite() || !qy.is_finite() {
            return Err(Error::Data(format!(
                "query {qi} has non-finite coordinates"
            )));
        }
        for i in 0..n {
            let dx = pts[i].x - qx;
            let dy = pts[i].y - qy;
            rhs[i] = vgm.gamma((dx * dx + dy * dy).sqrt());
        }
        rhs[n] = T::one();
        let sol = factors.solve(&rhs.view())?;

        let mut est = T::zero();
        let mut var = sol[n]; // Lagrange multiplier.
        for i in 0..n {
            est += sol[i] * (pts[i].value - mean);
            var += sol[i] * rhs[i];
        }
        values[qi] = est + mean;
        variances[qi] = var.max(T::zero());
    }
    Ok((values, variances))
}

/// Solve one query's weight vector directly (exposed for verification;
/// production prediction goes through [`kriging_predict`]).
pub fn kriging_weights<T: Scalar>(
    obs: &ObservationSet<T>,
    query: (T, T),
    vgm: &VariogramModel<T>,
) -> Result<Array1<T>> {
    let n = obs.len();
    let pts = obs.points();
    let mut a = Array2::zeros((n + 1, n + 1));
    for i in 0..n {
        for j in 0..n {
            let dx = pts[i].x - pts[j].x;
            let dy = pts[i].y - pts[j].y;
            a[[i, j]] = vgm.gamma((dx * dx + dy * dy).sqrt());
        }
        a[[i, n]] = T::one();
        a[[n, i]] = T::one();
    }
    let mut rhs = Array1::zeros(n + 1);
    for i in 0..n {
        let dx = pts[i].x - query.0;
        let dy = pts[i].y - query.1;
        rhs[i] = vgm.gamma((dx * dx + dy * dy).sqrt());
    }
    rhs[n] = T::one();
    let sol = crate::linalg::solve(&a.view(), &rhs.view())?;
    Ok(sol.slice(ndarray::s![..n]).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::variogram::VariogramKind;
    use crate::observations::Observation;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn spherical(nugget: f64, sill: f64, range: f64) -> VariogramModel<f64> {
        VariogramModel {
            kind: VariogramKind::Spherical,
            nugget,
            sill,
            range,
            empirical: vec![],
        }
    }

    fn scattered(seed: u64, n: usize) -> ObservationSet<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        ObservationSet::new(
            (0..n)
                .map(|_| {
                    let x: f64 = rng.random_range(0.0..10.0);
                    let y: f64 = rng.random_range(0.0..10.0);
                    Observation {
                        x,
                        y,
                        value: (0.4 * x).sin() + 0.1 * y,
                    }
                })
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn zero_nugget_interpolates_exactly_with_zero_variance() {
        let obs = scattered(2, 12);
        let vgm = spherical(0.0, 1.0, 6.0);
        let queries: Vec<(f64, f64)> = obs.points().iter().map(|o| (o.x, o.y)).collect();
        let (values, variances) = kriging_predict(&obs, &queries, &vgm).unwrap();
        for (i, o) in obs.points().iter().enumerate() {
            assert_abs_diff_eq!(values[i], o.value, epsilon = 1e-8);
            assert!(variances[i].abs() <= 1e-8, "variance {}", variances[i]);
        }
    }

    #[test]
    fn midpoint_of_two_observations_splits_weights_evenly() {
        let obs = ObservationSet::new(vec![
            Observation { x: 0.0, y: 0.0, value: 1.0 },
            Observation { x: 2.0, y: 0.0, value: 3.0 },
        ])
        .unwrap();
        let vgm = spherical(0.0, 1.0, 5.0);
        let w = kriging_weights(&obs, (1.0, 0.0), &vgm).unwrap();
        assert_abs_diff_eq!(w[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(w[1], 0.5, epsilon = 1e-10);
        let (values, _) = kriging_predict(&obs, &[(1.0, 0.0)], &vgm).unwrap();
        assert_abs_diff_eq!(values[0], 2.0, epsilon = 1e-10);
    }

    #[test]
    fn weights_always_sum_to_one() {
        let obs = scattered(17, 20);
        let vgm = spherical(0.05, 0.9, 4.0);
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        for _ in 0..25 {
            let q = (rng.random_range(-2.0..12.0), rng.random_range(-2.0..12.0));
            let w = kriging_weights(&obs, q, &vgm).unwrap();
            assert_abs_diff_eq!(w.sum(), 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn singular_system_is_regularized_with_warning() {
        // A pure-nugget-like model with a zero semivariance block between
        // clustered points drives the system toward singularity; the
        // regularized retry must still produce finite output.
        let obs = ObservationSet::new(vec![
            Observation { x: 0.0, y: 0.0, value: 1.0 },
            Observation { x: 1e-9, y: 0.0, value: 1.0 },
            Observation { x: 0.0, y: 1e-9, value: 1.0 },
        ])
        .unwrap();
        let vgm = spherical(0.0, 1e-12, 10.0);
        let (values, variances) = kriging_predict(&obs, &[(0.5, 0.5)], &vgm).unwrap();
        assert!(values[0].is_finite());
        assert!(variances[0].is_finite());
    }

    #[test]
    fn prediction_is_deterministic() {
        let obs = scattered(31, 15);
        let vgm = spherical(0.01, 0.8, 5.0);
        let queries = [(3.3, 4.4), (7.1, 0.2)];
        let (a, va) = kriging_predict(&obs, &queries, &vgm).unwrap();
        let (b, vb) = kriging_predict(&obs, &queries, &vgm).unwrap();
        for i in 0..queries.len() {
            assert_eq!(a[i].to_bits(), b[i].to_bits());
            assert_eq!(va[i].to_bits(), vb[i].to_bits());
        }
    }
}
