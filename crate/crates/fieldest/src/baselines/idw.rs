//! Inverse distance weighting (Shepard's method).

use crate::error::{Error, Result};
use crate::observations::ObservationSet;
use crate::scalar::Scalar;
use ndarray::Array1;
use serde::{Deserialize, Serialize};

/// Settings for [`idw_predict`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct IdwConfig<T: Scalar> {
    /// Distance exponent; weights are `d^(−power)`.
    pub power: T,
    /// Restrict each query to its nearest observations; `None` uses all.
    pub max_neighbors: Option<usize>,
}

impl<T: Scalar> Default for IdwConfig<T> {
    fn default() -> Self {
        Self {
            power: T::from_f64_const(2.0),
            max_neighbors: None,
        }
    }
}

impl<T: Scalar> IdwConfig<T> {
    /// Check the config is internally consistent.
    pub fn validate(&self) -> Result<()> {
        if !self.power.is_finite() || !(self.power > T::zero()) {
            return Err(Error::Config(format!(
                "IDW power must be finite and positive, got {}",
                self.power
            )));
        }
        if self.max_neighbors == Some(0) {
            return Err(Error::Config(
                "IDW max_neighbors must be at least 1 when set".into(),
            ));
        }
        Ok(())
    }
}

/// Distance threshold below which a query is treated as coincident with an
/// observation and returns its value exactly.
const COINCIDENT: f64 = 1e-12;

/// Interpolate each query as the inverse-distance-weighted average of the
/// observed values. A query within 1e-12 of an observation returns that
/// observation's value exactly; output is always inside the observed value
/// range because the weights are convex.
pub fn idw_predict<T: Scalar>(
    obs: &ObservationSet<T>,
    queries: &[(T, T)],
    cfg: &IdwConfig<T>,
) -> Result<Array1<T>> {
    cfg.validate()?;
    let n = obs.len();
    if n == 0 {
        return Err(Error::InsufficientData(
            "IDW needs at least one observation".into(),
        ));
    }
    let coincident = T::from_f64_const(COINCIDENT);
    let mut out = Array1::zeros(queries.len());

    for (qi, &(qx, qy)) in queries.iter().enumerate() {
        if !qx.is_finite() || !qy.is_finite() {
            return Err(Error::Data(format!(
                "query {qi} has non-finite coordinates"
            )));
        }
        let mut cands: Vec<(T, T)> = obs
            .points()
            .iter()
            .map(|o| {
                let dx = o.x - qx;
                let dy = o.y - qy;
                ((dx * dx + dy * dy).sqrt(), o.value)
            })
            .collect();
        if let Some(limit) = cfg.max_neighbors {
            if limit < n {
                cands.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite distances"));
                cands.truncate(limit);
            }
        }

        // Coincident queries bypass the weighting entirely, as does a
        // single candidate (whose weighted average is itself).
        if let Some(&(_, v)) = cands.iter().find(|&&(d, _)| d < coincident) {
            out[qi] = v;
            continue;
        }
        if cands.len() == 1 {
            out[qi] = cands[0].1;
            continue;
        }

        let mut num = T::zero();
        let mut den = T::zero();
        for &(d, v) in &cands {
            let w = d.powf(-cfg.power);
            num += w * v;
            den += w;
        }
        out[qi] = num / den;
    }
    Ok(out)
}
