//! Scattered observations, neighbor graphs, and neighbor covariates.
//!
//! An [`ObservationSet`] holds deduplicated point measurements `(x, y, value)`.
//! From it we build an m-nearest-neighbor graph under Euclidean distance and
//! assemble, for every point, a covariate row
//! `[x_i, y_i, x_i^1, y_i^1, v_i^1, ..., x_i^m, y_i^m, v_i^m]`
//! describing the point and its m neighbors. Covariate rows are min-max
//! normalized per column; the scaling is kept so query points can be mapped
//! into the same normalized space later.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Read;

/// One measured point: planar coordinates plus the observed attribute value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Observation<T: Scalar> {
    pub x: T,
    pub y: T,
    pub value: T,
}

/// An ordered collection of distinct, finite observations.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ObservationSet<T: Scalar> {
    points: Vec<Observation<T>>,
}

/// Column mapping and delimiter for observation files.
///
/// The defaults expect a header row naming `x`, `y` and `value` columns in a
/// comma-delimited file. A `z` column, if present, is ignored with a warning
/// (this crate works strictly in the plane).
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub x: String,
    pub y: String,
    pub value: String,
    pub delimiter: u8,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            x: "x".into(),
            y: "y".into(),
            value: "value".into(),
            delimiter: b',',
        }
    }
}

/// Hashable identity for a coordinate pair, used for deduplication.
///
/// Collapses `-0.0` onto `0.0` so the key agrees with `==` on parsed values.
fn coord_key<T: Scalar>(x: T, y: T) -> (u64, u64) {
    let norm = |v: T| {
        let f = v.to_f64().expect("finite coordinate");
        if f == 0.0 {
            0.0f64.to_bits()
        } else {
            f.to_bits()
        }
    };
    (norm(x), norm(y))
}

impl<T: Scalar> ObservationSet<T> {
    /// Build a set from points already in memory.
    ///
    /// Every field must be finite and no two points may share coordinates;
    /// use [`load_observations`] for inputs that still need deduplication.
    pub fn new(points: Vec<Observation<T>>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.value.is_finite()) {
                return Err(Error::Data(format!(
                    "non-finite observation at index {i}: ({}, {}, {})",
                    p.x, p.y, p.value
                )));
            }
            if let Some(first) = seen.insert(coord_key(p.x, p.y), i) {
                return Err(Error::Data(format!(
                    "observations {first} and {i} share coordinates ({}, {})",
                    p.x, p.y
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Observation<T>] {
        &self.points
    }

    /// N×2 coordinate matrix in observation order.
    pub fn coords(&self) -> Array2<T> {
        let mut out = Array2::zeros((self.points.len(), 2));
        for (i, p) in self.points.iter().enumerate() {
            out[[i, 0]] = p.x;
            out[[i, 1]] = p.y;
        }
        out
    }

    /// Attribute values in observation order.
    pub fn values(&self) -> Array1<T> {
        Array1::from_iter(self.points.iter().map(|p| p.value))
    }
}

/// Read observations from delimited text with a header row.
///
/// Rows sharing exact coordinates are collapsed to a single observation
/// carrying their mean value (a warning is logged per collapsed location).
/// Malformed rows and non-finite numbers are rejected with the offending
/// line number.
pub fn load_observations<T: Scalar, R: Read>(
    source: R,
    schema: &CsvSchema,
) -> Result<ObservationSet<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let ix = find(&schema.x)
        .ok_or_else(|| Error::Data(format!("missing column '{}' in header", schema.x)))?;
    let iy = find(&schema.y)
        .ok_or_else(|| Error::Data(format!("missing column '{}' in header", schema.y)))?;
    let iv = find(&schema.value)
        .ok_or_else(|| Error::Data(format!("missing column '{}' in header", schema.value)))?;
    if find("z").is_some() {
        log::warn!("input has a 'z' column; this crate is planar, ignoring it");
    }

    // Accumulate (sum, count) per coordinate so duplicates average.
    let mut order: Vec<(u64, u64)> = Vec::new();
    let mut acc: HashMap<(u64, u64), (T, T, f64, usize)> = HashMap::new();

    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |idx: usize| -> Result<f64> {
            let raw = record.get(idx).ok_or_else(|| {
                Error::Data(format!("line {line}: too few fields"))
            })?;
            raw.parse::<f64>()
                .map_err(|_| Error::Data(format!("line {line}: cannot parse '{raw}' as a number")))
        };
        let x = field(ix)?;
        let y = field(iy)?;
        let v = field(iv)?;
        if !(x.is_finite() && y.is_finite() && v.is_finite()) {
            return Err(Error::Data(format!(
                "line {line}: non-finite value ({x}, {y}, {v})"
            )));
        }
        let tx = T::from_f64_const(x);
        let ty = T::from_f64_const(y);
        let key = coord_key(tx, ty);
        match acc.get_mut(&key) {
            Some(slot) => {
                slot.2 += v;
                slot.3 += 1;
            }
            None => {
                order.push(key);
                acc.insert(key, (tx, ty, v, 1));
            }
        }
    }

    let mut points = Vec::with_capacity(order.len());
    for key in order {
        let (x, y, sum, count) = acc.remove(&key).expect("key recorded during ingest");
        if count > 1 {
            log::warn!(
                "{count} rows share coordinates ({x}, {y}); averaged to one observation"
            );
        }
        points.push(Observation {
            x,
            y,
            value: T::from_f64_const(sum / count as f64),
        });
    }

    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 distinct observations, got {}",
            points.len()
        )));
    }
    ObservationSet::new(points)
}

/// m-nearest-neighbor structure over an observation set.
///
/// Row `i` lists the `m` nearest observations to point `i` (nearest first);
/// ties are broken toward the lower observation index so results are
/// deterministic. Training graphs never list a point as its own neighbor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct NeighborGraph<T: Scalar> {
    pub m: usize,
    /// N×m neighbor indices, each row sorted by ascending distance.
    pub indices: Array2<usize>,
    /// N×m Euclidean distances matching `indices`.
    pub distances: Array2<T>,
}

/// Sort candidate `(index, distance)` pairs and keep the `m` nearest.
///
/// The sort is stable and candidates arrive in index order, so exact
/// distance ties resolve toward the lower index.
fn nearest_m<T: Scalar>(mut candidates: Vec<(usize, T)>, m: usize) -> Vec<(usize, T)> {
    candidates.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite distances"));
    candidates.truncate(m);
    candidates
}

fn euclidean<T: Scalar>(a: &Observation<T>, b: &Observation<T>) -> T {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

/// Build the m-nearest-neighbor graph for training points (self excluded).
pub fn build_neighbor_graph<T: Scalar>(
    obs: &ObservationSet<T>,
    m: usize,
) -> Result<NeighborGraph<T>> {
    if m == 0 {
        return Err(Error::Config("neighbor count m must be positive".into()));
    }
    let n = obs.len();
    if m >= n {
        return Err(Error::InsufficientData(format!(
            "m = {m} neighbors requested but only {n} observations exist \
             (need at least m+1 so every point has m distinct neighbors)"
        )));
    }
    let pts = obs.points();
    let mut indices = Array2::zeros((n, m));
    let mut distances = Array2::zeros((n, m));
    for i in 0..n {
        let candidates: Vec<(usize, T)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, euclidean(&pts[i], &pts[j])))
            .collect();
        for (k, (j, d)) in nearest_m(candidates, m).into_iter().enumerate() {
            indices[[i, k]] = j;
            distances[[i, k]] = d;
        }
    }
    Ok(NeighborGraph {
        m,
        indices,
        distances,
    })
}

/// Per-column min/max captured when normalizing a covariate matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ColumnScaling<T: Scalar> {
    pub lo: Array1<T>,
    pub hi: Array1<T>,
}

impl<T: Scalar> ColumnScaling<T> {
    /// Fit min/max per column of `raw`.
    fn fit(raw: &Array2<T>) -> Self {
        let cols = raw.ncols();
        let mut lo = Array1::from_elem(cols, T::infinity());
        let mut hi = Array1::from_elem(cols, T::neg_infinity());
        for row in raw.rows() {
            for (c, &v) in row.iter().enumerate() {
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
            }
        }
        Self { lo, hi }
    }

    /// Map raw values to the unit interval per column.
    ///
    /// Constant columns (max == min) map to 0 rather than dividing by zero.
    /// Values outside the fitted range land outside [0, 1]; that is expected
    /// for query points beyond the training bounding box and is not clamped.
    pub fn normalize(&self, raw: &Array2<T>) -> Array2<T> {
        let mut out = raw.clone();
        for mut row in out.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                let span = self.hi[c] - self.lo[c];
                *v = if span > T::zero() {
                    (*v - self.lo[c]) / span
                } else {
                    T::zero()
                };
            }
        }
        out
    }

    /// Invert [`normalize`](Self::normalize); constant columns recover their
    /// original (minimum) value.
    pub fn denormalize(&self, normalized: &Array2<T>) -> Array2<T> {
        let mut out = normalized.clone();
        for mut row in out.rows_mut() {
            for (c, v) in row.iter_mut().enumerate() {
                let span = self.hi[c] - self.lo[c];
                *v = self.lo[c] + *v * span.max(T::zero());
            }
        }
        out
    }
}

/// Normalized neighbor-covariate rows plus the scaling that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CovariateMatrix<T: Scalar> {
    /// N×(3m+2) normalized rows.
    pub rows: Array2<T>,
    /// Per-column scaling fitted on the training assembly.
    pub scaling: ColumnScaling<T>,
}

impl<T: Scalar> CovariateMatrix<T> {
    /// Undo normalization, recovering the raw covariate assembly.
    pub fn denormalized(&self) -> Array2<T> {
        self.scaling.denormalize(&self.rows)
    }
}

/// Assemble raw (un-normalized) covariate rows from a neighbor structure.
fn assemble_rows<T: Scalar>(
    centers: &[(T, T)],
    obs: &ObservationSet<T>,
    indices: &Array2<usize>,
) -> Array2<T> {
    let m = indices.ncols();
    let pts = obs.points();
    let mut out = Array2::zeros((centers.len(), 3 * m + 2));
    for (i, &(cx, cy)) in centers.iter().enumerate() {
        out[[i, 0]] = cx;
        out[[i, 1]] = cy;
        for k in 0..m {
            let nb = &pts[indices[[i, k]]];
            out[[i, 2 + 3 * k]] = nb.x;
            out[[i, 3 + 3 * k]] = nb.y;
            out[[i, 4 + 3 * k]] = nb.value;
        }
    }
    out
}

/// Raw covariate rows for the training points, before normalization.
///
/// Row `i` is `[x_i, y_i, x_i^1, y_i^1, v_i^1, ..., x_i^m, y_i^m, v_i^m]`
/// with neighbors in the graph's (ascending-distance) order.
pub fn raw_covariates<T: Scalar>(
    obs: &ObservationSet<T>,
    graph: &NeighborGraph<T>,
) -> Array2<T> {
    let centers: Vec<(T, T)> = obs.points().iter().map(|p| (p.x, p.y)).collect();
    assemble_rows(&centers, obs, &graph.indices)
}

/// Build the normalized training covariate matrix.
///
/// Columns are min-max scaled to [0, 1]; constant columns normalize to 0
/// with a logged warning instead of dividing by zero.
pub fn build_covariates<T: Scalar>(
    obs: &ObservationSet<T>,
    graph: &NeighborGraph<T>,
) -> CovariateMatrix<T> {
    let raw = raw_covariates(obs, graph);
    let scaling = ColumnScaling::fit(&raw);
    let constant: Vec<usize> = (0..raw.ncols())
        .filter(|&c| scaling.hi[c] == scaling.lo[c])
        .collect();
    if !constant.is_empty() {
        log::warn!(
            "covariate columns {constant:?} are constant; normalizing them to 0"
        );
    }
    let rows = scaling.normalize(&raw);
    CovariateMatrix { rows, scaling }
}

/// Build normalized covariate rows for query locations.
///
/// Neighbors come from the training observations only; a query sitting
/// exactly on an observation keeps that observation as its nearest neighbor
/// at distance zero (queries have no self-exclusion). Rows are normalized
/// with the *training* scaling, so coordinates outside the training bounding
/// box may fall outside [0, 1] — deliberately unclamped.
pub fn build_query_covariates<T: Scalar>(
    query_points: &[(T, T)],
    obs: &ObservationSet<T>,
    m: usize,
    scaling: &ColumnScaling<T>,
) -> Result<CovariateMatrix<T>> {
    if m == 0 {
        return Err(Error::Config("neighbor count m must be positive".into()));
    }
    let n = obs.len();
    if m > n {
        return Err(Error::InsufficientData(format!(
            "m = {m} neighbors requested but only {n} observations exist"
        )));
    }
    let pts = obs.points();
    let mut indices = Array2::zeros((query_points.len(), m));
    for (qi, &(qx, qy)) in query_points.iter().enumerate() {
        let candidates: Vec<(usize, T)> = pts
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let dx = qx - p.x;
                let dy = qy - p.y;
                (j, (dx * dx + dy * dy).sqrt())
            })
            .collect();
        for (k, (j, _)) in nearest_m(candidates, m).into_iter().enumerate() {
            indices[[qi, k]] = j;
        }
    }
    let raw = assemble_rows(query_points, obs, &indices);
    let rows = scaling.normalize(&raw);
    Ok(CovariateMatrix {
        rows,
        scaling: scaling.clone(),
    })
}
