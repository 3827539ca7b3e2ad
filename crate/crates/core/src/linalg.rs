//! Small dense linear-algebra helpers over coefficient vectors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Matrix whose columns are the given vectors.
pub fn columns<V: AsRef<[f64]>>(n: usize, vecs: &[V]) -> DMatrix<f64> {
    DMatrix::from_fn(n, vecs.len(), |i, j| vecs[j].as_ref()[i])
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

/// `σ_max / σ_min`, infinite for a singular matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Least-squares coordinates of `b` in the column span of `a`, together with
/// the Euclidean norm of the residual.
pub fn least_squares(a: &DMatrix<f64>, b: &[f64]) -> Result<(Vec<f64>, f64)> {
    if a.nrows() != b.len() {
        return Err(Error::Dimension(format!(
            "matrix has {} rows, right-hand side {}",
            a.nrows(),
            b.len()
        )));
    }
    if a.ncols() == 0 {
        return Ok((Vec::new(), norm(b)));
    }
    let rhs = DVector::from_column_slice(b);
    let svd = a.clone().svd(true, true);
    let tol = 1e-13 * svd.singular_values.max().max(1.0);
    let x = svd.solve(&rhs, tol).map_err(|e| Error::Dimension(e.to_string()))?;
    let r = a * &x - rhs;
    Ok((x.iter().copied().collect(), r.norm()))
}

/// Orthonormal basis of the orthogonal complement of the column span of `q`
/// (which must have orthonormal columns) in `R^n`.
pub fn orthogonal_complement(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    let mut out: Vec<DVector<f64>> = Vec::new();
    let mut frame: Vec<DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    for i in 0..n {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        for _ in 0..2 {
            for f in &frame {
                let c = f.dot(&v);
                v.axpy(-c, f, 1.0);
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            v /= nv;
            frame.push(v.clone());
            out.push(v);
        }
        if frame.len() == n {
            break;
        }
    }
    DMatrix::from_columns(&out)
}
