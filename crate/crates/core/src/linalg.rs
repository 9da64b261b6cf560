//! Small dense helpers shared by the measure and cohomology code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Perron root of a non-negative primitive matrix with its positive right and left
/// eigenvectors. Vectors come back with unit 1-norm; callers renormalize.
pub(crate) fn perron_pair(m: &DMatrix<f64>, what: &'static str) -> Result<(f64, DVector<f64>, DVector<f64>)> {
    let right = perron_vector(m, what)?;
    let left = perron_vector(&m.transpose(), what)?;
    let mr = m * &right;
    let lambda = mr.sum() / right.sum();
    let scale = lambda * right.amax();
    let residual = (&mr - &right * lambda).amax() / scale;
    let ml = m.transpose() * &left;
    let residual_left = (&ml - &left * lambda).amax() / (lambda * left.amax());
    let worst = residual.max(residual_left);
    if !worst.is_finite() || worst > 1e-12 {
        return Err(Error::ConvergenceFailure { what, residual: worst });
    }
    Ok((lambda, right, left))
}

fn perron_vector(m: &DMatrix<f64>, what: &'static str) -> Result<DVector<f64>> {
    let n = m.nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut estimate = 0.0;
    for _ in 0..2000 {
        let y = m * &x;
        let norm = y.sum();
        if !(norm > 0.0) {
            return Err(Error::ConvergenceFailure { what, residual: f64::NAN });
        }
        let y = y / norm;
        let change = (&y - &x).amax();
        x = y;
        estimate = norm;
        if change < 1e-15 {
            break;
        }
    }
    // inverse iteration polishes the direction when the spectral gap is small
    let shift = estimate * (1.0 + 1e-10) + 1e-14;
    let shifted = m - DMatrix::identity(n, n) * shift;
    let lu = shifted.lu();
    for _ in 0..3 {
        let Some(y) = lu.solve(&x) else { break };
        let norm = y.sum();
        if !norm.is_finite() || norm == 0.0 {
            break;
        }
        x = y / norm;
    }
    if x.iter().any(|&v| !(v > 0.0)) {
        let residual = x.iter().cloned().fold(f64::INFINITY, f64::min);
        return Err(Error::ConvergenceFailure { what, residual });
    }
    Ok(x)
}

/// Orthonormal basis (columns) of the column span of `m`, by modified Gram-Schmidt applied
/// twice. Columns whose residual drops below `tol` relative to their norm are skipped.
pub(crate) fn orthonormal_columns(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for col in m.column_iter() {
        let mut v = col.into_owned();
        let norm0 = v.norm();
        if norm0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&v);
                v -= b * c;
            }
        }
        let norm = v.norm();
        if norm > tol * norm0 {
            basis.push(v / norm);
        }
    }
    if basis.is_empty() {
        return DMatrix::zeros(m.nrows(), 0);
    }
    DMatrix::from_columns(&basis)
}

/// Given `w` with orthonormal columns (n x r), returns n - r orthonormal vectors spanning
/// the orthogonal complement of its column span. Built from the Householder reflections
/// that triangularize `w`, so the cost is O(n^2 r).
pub(crate) fn orthogonal_complement(w: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let n = w.nrows();
    let r = w.ncols();
    let mut a = w.clone();
    let mut reflectors: Vec<DVector<f64>> = Vec::with_capacity(r);
    for j in 0..r {
        let mut v = DVector::zeros(n);
        for i in j..n {
            v[i] = a[(i, j)];
        }
        let alpha = -v[j].signum() * v.norm();
        let alpha = if alpha == 0.0 { -v.norm() } else { alpha };
        v[j] -= alpha;
        let vnorm = v.norm();
        if vnorm > 0.0 {
            v /= vnorm;
            for c in j..r {
                let dot: f64 = (j..n).map(|i| v[i] * a[(i, c)]).sum();
                for i in j..n {
                    a[(i, c)] -= 2.0 * v[i] * dot;
                }
            }
        }
        reflectors.push(v);
    }
    (r..n)
        .map(|k| {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            for v in reflectors.iter().rev() {
                let dot = v.dot(&e);
                e -= v * (2.0 * dot);
            }
            e
        })
        .collect()
}

/// Column-pivoted Gram-Schmidt: repeatedly takes the column with the largest residual and
/// stops once every residual is at most `abs_tol`. Returns the chosen column indices in
/// order and an orthonormal basis of their span.
pub(crate) fn pivoted_basis(m: &DMatrix<f64>, abs_tol: f64) -> (Vec<usize>, DMatrix<f64>) {
    let mut resid: Vec<DVector<f64>> = m.column_iter().map(|c| c.into_owned()).collect();
    let mut chosen = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    loop {
        let best = (0..resid.len())
            .filter(|j| !chosen.contains(j))
            .map(|j| (j, resid[j].norm()))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let Some((j, norm)) = best else { break };
        if !(norm > abs_tol) {
            break;
        }
        let q = &resid[j] / norm;
        for (k, r) in resid.iter_mut().enumerate() {
            if k != j && !chosen.contains(&k) {
                for _ in 0..2 {
                    let c = q.dot(r);
                    *r -= &q * c;
                    for b in &basis {
                        let c = b.dot(r);
                        *r -= b * c;
                    }
                }
            }
        }
        chosen.push(j);
        basis.push(q);
    }
    let out = if basis.is_empty() { DMatrix::zeros(m.nrows(), 0) } else { DMatrix::from_columns(&basis) };
    (chosen, out)
}

/// Orthonormal basis of the null space of `m`: the complement of its row space, which is
/// found by pivoted Gram-Schmidt on the rows with tolerance `rel_tol` times the largest row.
pub(crate) fn null_space(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    let rows = m.transpose();
    let scale = rows.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let (_, w) = pivoted_basis(&rows, rel_tol * scale);
    let comp = orthogonal_complement(&w);
    if comp.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&comp)
    }
}
