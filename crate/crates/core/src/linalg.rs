//! Small complex linear-algebra helpers shared by the solvers.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{CoreError, CoreResult};

/// Condition number above which a selected-column system is treated as
/// numerically dependent.
pub const RANK_CONDITION_LIMIT: f64 = 1e12;

/// Hermitian inner product `sum conj(a_i) b_i`.
pub fn dot_conj(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x.conj() * y;
    }
    acc
}

pub fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

pub fn norm(a: &[Complex64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y <- y + alpha * x`.
pub fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x.iter()) {
        *yi += alpha * xi;
    }
}

/// Exact least-squares solution over a small set of columns.
///
/// Solves `min_x || rhs - C x ||_2` for the matrix whose columns are
/// `columns`, via a thin SVD. Fails with [`CoreError::RankDeficient`] when the
/// column set's condition number exceeds [`RANK_CONDITION_LIMIT`].
pub fn least_squares_columns(
    columns: &[&[Complex64]],
    rhs: &[Complex64],
) -> CoreResult<Vec<Complex64>> {
    let k = columns.len();
    let l = rhs.len();
    debug_assert!(k >= 1);
    debug_assert!(columns.iter().all(|c| c.len() == l));

    let a: Mat<Complex64> = Mat::from_fn(l, k, |i, j| columns[j][i]);
    let svd = a
        .thin_svd()
        .map_err(|_| CoreError::invalid("SVD of the selected columns did not converge"))?;
    let (u, s, v) = (svd.U(), svd.S(), svd.V());

    let sigma_max = s[0].re;
    let sigma_min = s[k - 1].re;
    if sigma_max <= 0.0 {
        return Err(CoreError::RankDeficient {
            cond: f64::INFINITY,
            limit: RANK_CONDITION_LIMIT,
        });
    }
    let cond = sigma_max / sigma_min;
    // NaN (0/0) counts as rank-deficient too.
    if cond > RANK_CONDITION_LIMIT || cond.is_nan() {
        return Err(CoreError::RankDeficient {
            cond,
            limit: RANK_CONDITION_LIMIT,
        });
    }

    // x = V diag(1/sigma) U^H rhs
    let mut utb = vec![Complex64::new(0.0, 0.0); k];
    for (j, out) in utb.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..l {
            acc += u[(i, j)].conj() * rhs[i];
        }
        *out = acc / s[j].re;
    }
    let mut x = vec![Complex64::new(0.0, 0.0); k];
    for (i, out) in x.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, c) in utb.iter().enumerate() {
            acc += v[(i, j)] * c;
        }
        *out = acc;
    }
    Ok(x)
}

/// Thin SVD of a full dictionary matrix, exposed as plain vectors.
pub struct ThinSvd {
    /// Left singular vectors, column-major: `u[k]` has length L.
    pub u: Vec<Vec<Complex64>>,
    /// Singular values, descending.
    pub sigma: Vec<f64>,
    /// Right singular vectors, column-major: `v[k]` has length G.
    pub v: Vec<Vec<Complex64>>,
}

pub fn thin_svd(columns: &[Vec<Complex64>]) -> CoreResult<ThinSvd> {
    let g = columns.len();
    let l = columns[0].len();
    let a: Mat<Complex64> = Mat::from_fn(l, g, |i, j| columns[j][i]);
    let svd = a
        .thin_svd()
        .map_err(|_| CoreError::invalid("dictionary SVD did not converge"))?;
    let rank_dim = l.min(g);
    let u = (0..rank_dim)
        .map(|k| (0..l).map(|i| svd.U()[(i, k)]).collect())
        .collect();
    let sigma = (0..rank_dim).map(|k| svd.S()[k].re).collect();
    let v = (0..rank_dim)
        .map(|k| (0..g).map(|i| svd.V()[(i, k)]).collect())
        .collect();
    Ok(ThinSvd { u, sigma, v })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(values: &[(f64, f64)]) -> Vec<Complex64> {
        values
            .iter()
            .map(|&(re, im)| Complex64::new(re, im))
            .collect()
    }

    #[test]
    fn least_squares_reproduces_exact_combination() {
        let c0 = col(&[(1.0, 0.0), (0.0, 1.0), (2.0, -1.0), (0.5, 0.5)]);
        let c1 = col(&[(0.0, -1.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 2.0)]);
        let x0 = Complex64::new(0.3, -0.7);
        let x1 = Complex64::new(-1.2, 0.4);
        let rhs: Vec<Complex64> = c0.iter().zip(&c1).map(|(a, b)| a * x0 + b * x1).collect();
        let x = least_squares_columns(&[&c0, &c1], &rhs).unwrap();
        assert!((x[0] - x0).norm() < 1e-12);
        assert!((x[1] - x1).norm() < 1e-12);
    }

    #[test]
    fn least_squares_flags_dependent_columns() {
        let c0 = col(&[(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let c1 = col(&[(2.0, 0.0), (4.0, 0.0), (6.0, 0.0)]);
        let rhs = col(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        match least_squares_columns(&[&c0, &c1], &rhs) {
            Err(CoreError::RankDeficient { .. }) => {}
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn least_squares_residual_is_orthogonal_to_columns() {
        let c0 = col(&[(1.0, 0.2), (0.3, 1.0), (2.0, -1.0), (0.1, 0.0)]);
        let c1 = col(&[(0.0, -1.0), (1.5, 0.0), (-1.0, 0.3), (0.0, 2.0)]);
        let rhs = col(&[(1.0, 1.0), (2.0, -1.0), (0.0, 0.5), (-3.0, 0.0)]);
        let x = least_squares_columns(&[&c0, &c1], &rhs).unwrap();
        let mut r = rhs.clone();
        axpy(-x[0], &c0, &mut r);
        axpy(-x[1], &c1, &mut r);
        assert!(dot_conj(&c0, &r).norm() < 1e-12 * norm(&c0) * norm(&rhs));
        assert!(dot_conj(&c1, &r).norm() < 1e-12 * norm(&c1) * norm(&rhs));
    }

    #[test]
    fn thin_svd_reconstructs_matrix() {
        let cols = vec![
            col(&[(1.0, 0.5), (0.0, 1.0), (2.0, -1.0)]),
            col(&[(0.0, -1.0), (1.0, 0.0), (-1.0, 0.0)]),
        ];
        let svd = thin_svd(&cols).unwrap();
        for (j, c) in cols.iter().enumerate() {
            for (i, expected) in c.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..svd.sigma.len() {
                    acc += svd.u[k][i] * svd.sigma[k] * svd.v[k][j].conj();
                }
                assert!((acc - expected).norm() < 1e-12);
            }
        }
    }
}
