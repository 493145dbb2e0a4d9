//! SVD-based dense linear algebra: pseudoinverse, range projectors,
//! orthogonal complements, and minimum-norm least squares.

use faer::Mat;

use super::Matrix;
use crate::error::{Error, Result};

/// Thin singular value decomposition `M = U diag(s) Vt`.
///
/// With `k = min(rows, cols)`, `u` is `rows x k`, `s` has length `k` and is
/// non-increasing, and `vt` is `k x cols`. `u` and `vt` have orthonormal
/// columns/rows even when `M` is rank deficient.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub vt: Matrix,
}

impl Svd {
    /// Default numerical rank cut-off: `max(rows, cols) * eps * s_max`.
    pub fn default_tol(&self) -> f64 {
        let (m, n) = (self.u.rows(), self.vt.cols());
        let s_max = self.s.first().copied().unwrap_or(0.0);
        m.max(n) as f64 * f64::EPSILON * s_max
    }

    pub fn rank(&self, tol: f64) -> usize {
        self.s.iter().take_while(|&&s| s > tol).count()
    }

    pub fn reconstruct(&self) -> Matrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (j, s) in self.s.iter().enumerate() {
                us[(i, j)] *= s;
            }
        }
        us.matmul(&self.vt)
    }
}

pub fn svd(m: &Matrix) -> Result<Svd> {
    if !m.is_finite() {
        return Err(Error::contract("svd input contains non-finite entries"));
    }
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            u: Matrix::zeros(rows, 0),
            s: Vec::new(),
            vt: Matrix::zeros(0, cols),
        });
    }
    let a = Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let d = a.thin_svd().map_err(|_| Error::numerical("svd", 0))?;
    let (u, v) = (d.U(), d.V());
    let sv = d.S().column_vector();

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]).then(i.cmp(&j)));
    let mut out_u = Matrix::zeros(rows, k);
    let mut out_vt = Matrix::zeros(k, cols);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = sv[src];
        let sign = if sigma < 0.0 { -1.0 } else { 1.0 };
        s.push(sigma.abs());
        for i in 0..rows {
            out_u.as_mut_slice()[i * k + dst] = sign * u[(i, src)];
        }
        for j in 0..cols {
            out_vt.as_mut_slice()[dst * cols + j] = v[(j, src)];
        }
    }
    Ok(Svd {
        u: out_u,
        s,
        vt: out_vt,
    })
}

/// Moore-Penrose pseudoinverse. `rank_tol = None` uses
/// [`Svd::default_tol`]. The zero matrix maps to the zero matrix of
/// transposed shape.
pub fn pinv(m: &Matrix, rank_tol: Option<f64>) -> Result<Matrix> {
    let d = svd(m)?;
    Ok(pinv_from_svd(&d, rank_tol))
}

pub fn pinv_from_svd(d: &Svd, rank_tol: Option<f64>) -> Matrix {
    let tol = rank_tol.unwrap_or_else(|| d.default_tol());
    let (rows, cols) = (d.u.rows(), d.vt.cols());
    let mut out = Matrix::zeros(cols, rows);
    for (k, &s) in d.s.iter().enumerate() {
        if s <= tol {
            break;
        }
        let v = d.vt.row(k);
        let u = d.u.column(k);
        out.add_outer(1.0 / s, v, &u);
    }
    out
}

pub fn rank(m: &Matrix) -> Result<usize> {
    let d = svd(m)?;
    Ok(d.rank(d.default_tol()))
}

/// Largest singular value.
pub fn spectral_norm(m: &Matrix) -> Result<f64> {
    Ok(svd(m)?.s.first().copied().unwrap_or(0.0))
}

/// Orthogonal projector onto `range(m)`.
pub fn range_projector(m: &Matrix) -> Result<Matrix> {
    let d = svd(m)?;
    let r = d.rank(d.default_tol());
    let rows = m.rows();
    let mut p = Matrix::zeros(rows, rows);
    for k in 0..r {
        let u = d.u.column(k);
        p.add_outer(1.0, &u, &u);
    }
    Ok(p)
}

/// Orthonormal basis of `range(m)^⊥` as the columns of a `rows x (rows - rank)`
/// matrix. Zero columns when `m` has full row rank.
pub fn range_complement_basis(m: &Matrix) -> Result<Matrix> {
    let rows = m.rows();
    let p = range_projector(m)?;
    let complement = Matrix::identity(rows).sub(&p);
    let d = svd(&complement)?;
    // Eigenvalues of I - P are exactly 0 or 1.
    let keep: Vec<usize> = (0..d.s.len()).filter(|&k| d.s[k] > 0.5).collect();
    Ok(d.u.select_columns(&keep))
}

/// Minimum-norm minimizer of `‖y - A x‖₂`.
pub fn min_norm_lstsq(a: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
    if a.rows() != y.len() {
        return Err(Error::contract(format!(
            "lstsq: matrix has {} rows, rhs has {} entries",
            a.rows(),
            y.len()
        )));
    }
    Ok(pinv(a, None)?.matvec(y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.shape() == b.shape() && a.sub(b).max_abs() <= tol
    }

    #[test]
    fn identity_singular_values() {
        let d = svd(&Matrix::identity(3)).unwrap();
        assert_eq!(d.s, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn embedded_diagonal() {
        let m = Matrix::diag(2, 3, &[3.0, 2.0]);
        let d = svd(&m).unwrap();
        assert!((d.s[0] - 3.0).abs() < 1e-14);
        assert!((d.s[1] - 2.0).abs() < 1e-14);
        assert!(close(&d.reconstruct(), &m, 1e-14));
    }

    #[test]
    fn zero_matrix_pinv_is_zero() {
        let p = pinv(&Matrix::zeros(3, 2), None).unwrap();
        assert_eq!(p.shape(), (2, 3));
        assert_eq!(p.max_abs(), 0.0);
    }

    #[test]
    fn zero_matrix_svd_has_orthonormal_u() {
        let d = svd(&Matrix::zeros(4, 2)).unwrap();
        let utu = d.u.transpose().matmul(&d.u);
        assert!(close(&utu, &Matrix::identity(2), 1e-14));
    }

    #[test]
    fn pinv_diagonal_reciprocal() {
        let m = Matrix::diag(3, 2, &[1.0, 2.0]);
        let p = pinv(&m, None).unwrap();
        assert!(close(&p, &Matrix::diag(2, 3, &[1.0, 0.5]), 1e-15));
    }

    #[test]
    fn pinv_identity() {
        let p = pinv(&Matrix::identity(4), None).unwrap();
        assert!(close(&p, &Matrix::identity(4), 1e-15));
    }

    #[test]
    fn axis_projector() {
        let e1 = Matrix::from_rows(&[vec![1.0], vec![0.0], vec![0.0]]);
        let p = range_projector(&e1).unwrap();
        assert!(close(&p, &Matrix::diag(3, 3, &[1.0, 0.0, 0.0]), 1e-15));
    }

    #[test]
    fn full_rank_square_projector_is_identity() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let p = range_projector(&m).unwrap();
        assert!(close(&p, &Matrix::identity(2), 1e-14));
    }

    #[test]
    fn complement_in_plane() {
        let e1 = Matrix::from_rows(&[vec![1.0], vec![0.0]]);
        let q = range_complement_basis(&e1).unwrap();
        assert_eq!(q.shape(), (2, 1));
        assert!(q[(0, 0)].abs() < 1e-15);
        assert!((q[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complement_of_invertible_is_empty() {
        let m = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let q = range_complement_basis(&m).unwrap();
        assert_eq!(q.shape(), (2, 0));
    }

    #[test]
    fn min_norm_symmetric_split() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0]]);
        let x = min_norm_lstsq(&a, &[2.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn min_norm_identity() {
        let y = vec![1.5, -2.0, 0.25];
        let x = min_norm_lstsq(&Matrix::identity(3), &y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn lstsq_length_mismatch() {
        assert!(matches!(
            min_norm_lstsq(&Matrix::identity(3), &[1.0]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut m = Matrix::identity(2);
        m[(0, 1)] = f64::NAN;
        assert!(svd(&m).is_err());
    }
}
