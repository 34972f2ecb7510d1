//! Small dense linear algebra.
//!
//! The systems solved in this crate are modest (covariance matrices over a
//! few hundred observations, tiny least-squares normal equations), so we
//! carry our own LU, Cholesky and Jacobi eigensolver instead of pulling in a
//! full linear-algebra stack. Everything operates on `ndarray` types and is
//! generic over [`Scalar`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// LU factorization with partial pivoting, reusable across right-hand
/// sides. Factor once, then [`LuFactors::solve`] per query vector.
#[derive(Debug, Clone)]
pub struct LuFactors<T: Scalar> {
    lu: Array2<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> LuFactors<T> {
    /// Factor a square matrix.
    ///
    /// Returns [`Error::Numerical`] when a pivot collapses relative to the
    /// matrix scale, which is the practical signal that the matrix is
    /// singular.
    pub fn factor(a: &ArrayView2<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Numerical(format!(
                "factorization expects a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let mut lu = a.to_owned();
        let mut perm: Vec<usize> = (0..n).collect();
        if n == 0 {
            return Ok(Self { lu, perm });
        }

        let scale = lu.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        if scale == T::zero() {
            return Err(Error::Numerical("singular system: zero matrix".into()));
        }
        let tiny = scale * T::epsilon() * T::from_usize_const(n.max(4));

        for col in 0..n {
            // Partial pivot: bring the largest remaining entry of this
            // column up.
            let mut pivot_row = col;
            let mut pivot_abs = lu[[col, col]].abs();
            for row in col + 1..n {
                let v = lu[[row, col]].abs();
                if v > pivot_abs {
                    pivot_abs = v;
                    pivot_row = row;
                }
            }
            if pivot_abs <= tiny {
                return Err(Error::Numerical(format!(
                    "singular system: pivot {pivot_abs} at column {col}"
                )));
            }
            if pivot_row != col {
                for k in 0..n {
                    lu.swap([col, k], [pivot_row, k]);
                }
                perm.swap(col, pivot_row);
            }

            let pivot = lu[[col, col]];
            for row in col + 1..n {
                let factor = lu[[row, col]] / pivot;
                lu[[row, col]] = factor;
                if factor == T::zero() {
                    continue;
                }
                for k in col + 1..n {
                    let delta = factor * lu[[col, k]];
                    lu[[row, k]] -= delta;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    /// Solve for one right-hand side.
    pub fn solve(&self, b: &ArrayView1<T>) -> Result<Array1<T>> {
        let n = self.lu.nrows();
        if b.len() != n {
            return Err(Error::Numerical(format!(
                "rhs length {} does not match system size {n}",
                b.len()
            )));
        }
        // Apply the row permutation, then forward/back substitution.
        let mut x = Array1::zeros(n);
        for (row, &src) in self.perm.iter().enumerate() {
            x[row] = b[src];
        }
        for row in 1..n {
            let mut acc = x[row];
            for k in 0..row {
                acc -= self.lu[[row, k]] * x[k];
            }
            x[row] = acc;
        }
        for row in (0..n).rev() {
            let mut acc = x[row];
            for k in row + 1..n {
                acc -= self.lu[[row, k]] * x[k];
            }
            x[row] = acc / self.lu[[row, row]];
        }
        Ok(x)
    }
}

/// Solve `a x = b` by LU decomposition with partial pivoting.
pub fn solve<T: Scalar>(a: &ArrayView2<T>, b: &ArrayView1<T>) -> Result<Array1<T>> {
    if a.nrows() != b.len() {
        return Err(Error::Numerical(format!(
            "solve expects a square system, got {}x{} with rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    LuFactors::factor(a)?.solve(b)
}

/// Cholesky factorization `a = l lᵀ` of a symmetric positive-definite matrix.
///
/// Returns the lower-triangular factor, or [`Error::Numerical`] if a
/// diagonal term fails to stay positive (the matrix is not positive
/// definite at working precision).
pub fn cholesky<T: Scalar>(a: &ArrayView2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Numerical(format!(
            "cholesky expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= T::zero() {
                    return Err(Error::Numerical(format!(
                        "matrix not positive definite: pivot {sum} at row {i}"
                    )));
                }
                l[[i, j]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Ok(l)
}

/// Solve `l lᵀ x = b` given the lower Cholesky factor `l`.
pub fn cholesky_solve<T: Scalar>(l: &ArrayView2<T>, b: &ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    debug_assert_eq!(b.len(), n);
    let mut x = b.to_owned();
    // Forward: l y = b.
    for i in 0..n {
        let mut acc = x[i];
        for k in 0..i {
            acc -= l[[i, k]] * x[k];
        }
        x[i] = acc / l[[i, i]];
    }
    // Backward: lᵀ x = y.
    for i in (0..n).rev() {
        let mut acc = x[i];
        for k in i + 1..n {
            acc -= l[[k, i]] * x[k];
        }
        x[i] = acc / l[[i, i]];
    }
    x
}

/// Log-determinant of `a` from its lower Cholesky factor.
pub fn cholesky_log_det<T: Scalar>(l: &ArrayView2<T>) -> T {
    let two = T::from_f64_const(2.0);
    let mut acc = T::zero();
    for i in 0..l.nrows() {
        acc += l[[i, i]].ln();
    }
    two * acc
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns `(values, vectors)` with eigenvalues sorted ascending and the
/// k-th column of `vectors` holding the eigenvector for `values[k]`. The
/// input is treated as symmetric; only its lower triangle is trusted when
/// the two halves disagree by rounding noise.
///
/// Jacobi is cubic per sweep, which is perfectly fine for the matrix sizes
/// this crate produces (graph Laplacians over at most a few thousand
/// observations).
pub fn symmetric_eigen<T: Scalar>(a: &ArrayView2<T>) -> Result<(Array1<T>, Array2<T>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Numerical(format!(
            "eigendecomposition expects a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut m = a.to_owned();
    // Symmetrize defensively so rounding asymmetry cannot stall convergence.
    for i in 0..n {
        for j in 0..i {
            let avg = (m[[i, j]] + m[[j, i]]) / T::from_f64_const(2.0);
            m[[i, j]] = avg;
            m[[j, i]] = avg;
        }
    }
    let mut v = Array2::eye(n);

    let max_off = |m: &Array2<T>| {
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..i {
                acc = acc.max(m[[i, j]].abs());
            }
        }
        acc
    };
    let initial = max_off(&m).max(m.diag().iter().fold(T::zero(), |s, &d| s.max(d.abs())));
    let target = initial * T::epsilon() * T::from_usize_const(n.max(1));

    const MAX_SWEEPS: usize = 100;
    let mut converged = initial == T::zero();
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= target {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (T::from_f64_const(2.0) * apq);
                let t = {
                    let denom = theta.abs() + (theta * theta + T::one()).sqrt();
                    let mag = T::one() / denom;
                    if theta < T::zero() {
                        -mag
                    } else {
                        mag
                    }
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;

                // Rotate rows/columns p and q of the working matrix.
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                // Accumulate the rotation into the eigenvector basis.
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
        // The sweep skips elements at or below `target`, so convergence is
        // judged on the same per-element criterion: once every off-diagonal
        // entry is under the threshold, further sweeps are no-ops.
        converged = max_off(&m) <= target;
    }
    if !converged {
        return Err(Error::Numerical(
            "jacobi eigensolver did not converge".into(),
        ));
    }

    // Sort eigenpairs ascending by value.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[[i, i]]
            .partial_cmp(&m[[j, j]])
            .expect("eigenvalues are finite")
    });
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, dst]] = v[[k, src]];
        }
    }
    Ok((values, vectors))
}
