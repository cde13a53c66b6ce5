//! Dense complex linear algebra helpers for small matrices.
//!
//! Everything here wraps `nalgebra` with the conventions used across the
//! crate: matrices are `DMatrix<Complex64>`, Hermitian eigendecompositions
//! are sorted ascending, and matrix exponentials of Hermitian generators go
//! through the spectral decomposition so the result is unitary by
//! construction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Max-entry norm.
pub fn max_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn fro_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ||M - M^dagger||_max.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    max_norm(&(m - m.adjoint()))
}

/// ||U^dagger U - 1||_max.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let n = u.ncols();
    max_norm(&(u.adjoint() * u - CMatrix::identity(n, n)))
}

pub fn check_hermitian(m: &CMatrix, rel_tol: f64) -> Result<()> {
    let scale = max_norm(m).max(1.0);
    let res = hermiticity_residual(m);
    if res > rel_tol * scale {
        return Err(Error::NotHermitian { residual: res });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Returns `(values, vectors)` with `vectors` holding orthonormal
/// eigenvectors as columns, `H = V diag(values) V^dagger`.
pub fn eigh(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = h.nrows();
    // nalgebra's SymmetricEigen works on the Hermitian part; symmetrize to
    // sweep rounding noise off the input.
    let hs = (h + h.adjoint()).scale(0.5);
    let se = hs.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &se.eigenvectors.column(i));
    }
    (values, vectors)
}

/// exp(factor * H) for Hermitian `H` via spectral decomposition.
///
/// 2x2 inputs take a closed-form path (H = a 1 + b.sigma), which the
/// integrator leans on heavily.
pub fn expm_hermitian(h: &CMatrix, factor: C64) -> CMatrix {
    if h.nrows() == 2 {
        return expm_hermitian_2x2(h, factor);
    }
    let (vals, vecs) = eigh(h);
    let n = h.nrows();
    let mut d = CMatrix::zeros(n, n);
    for (k, &v) in vals.iter().enumerate() {
        d[(k, k)] = (factor * cr(v)).exp();
    }
    &vecs * d * vecs.adjoint()
}

fn expm_hermitian_2x2(h: &CMatrix, factor: C64) -> CMatrix {
    let a = 0.5 * (h[(0, 0)].re + h[(1, 1)].re);
    let bz = 0.5 * (h[(0, 0)].re - h[(1, 1)].re);
    let off = 0.5 * (h[(0, 1)] + h[(1, 0)].conj());
    let (bx, by) = (off.re, -off.im);
    let b = (bx * bx + by * by + bz * bz).sqrt();
    let scale = (factor * cr(a)).exp();
    if b == 0.0 {
        return CMatrix::from_diagonal_element(2, 2, scale);
    }
    // exp(factor (a + b n.sigma)) = e^{factor a}(cosh(factor b) + sinh(factor b) n.sigma)
    let ch = (factor * cr(b)).cosh();
    let sh = (factor * cr(b)).sinh();
    let (nx, ny, nz) = (bx / b, by / b, bz / b);
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 0)] = scale * (ch + sh * cr(nz));
    m[(1, 1)] = scale * (ch - sh * cr(nz));
    m[(0, 1)] = scale * sh * c(nx, -ny);
    m[(1, 0)] = scale * sh * c(nx, ny);
    m
}

/// Hermitian logarithm of a unitary matrix: returns `K` with `U = exp(iK)`
/// and the eigenvalues of `K` in (-pi, pi].
///
/// Uses the joint diagonalization of the commuting Hermitian pair
/// `(U + U^dagger)/2` and `(U - U^dagger)/(2i)`, so only Hermitian
/// eigensolves are needed.
pub fn unitary_log(u: &CMatrix) -> Result<CMatrix> {
    let n = u.nrows();
    let res = unitarity_residual(u);
    if res > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "unitary_log: input not unitary (residual {res:.3e})"
        )));
    }
    let cos_part = (u + u.adjoint()).scale(0.5);
    let sin_part = (u - u.adjoint()).scale(0.5) * c(0.0, -1.0);
    // the sine part separates eigenangles linearly near zero, where the
    // cosine part is quadratically degenerate; diagonalize sine first and
    // refine its clusters with the cosine part (catching angles near pi)
    let (svals, svecs) = eigh(&sin_part);
    let mut basis = svecs.clone();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (svals[end] - svals[start]).abs() < 1e-8 {
            end += 1;
        }
        if end - start > 1 {
            let sub = basis.columns(start, end - start).into_owned();
            let c_sub = sub.adjoint() * &cos_part * &sub;
            let (_, w) = eigh(&c_sub);
            let refined = sub * w;
            for (j, col) in (start..end).enumerate() {
                basis.set_column(col, &refined.column(j));
            }
        }
        start = end;
    }
    let mut k = CMatrix::zeros(n, n);
    for j in 0..n {
        let col = basis.column(j);
        let cv = (col.adjoint() * &cos_part * col)[(0, 0)].re;
        let sv = (col.adjoint() * &sin_part * col)[(0, 0)].re;
        let angle = sv.atan2(cv);
        let proj = col * col.adjoint();
        k += proj * cr(angle);
    }
    Ok(k)
}

/// Solve `A x = b` by LU with partial pivoting.
pub fn solve(a: &CMatrix, b: &CVector) -> Option<CVector> {
    a.clone().lu().solve(b)
}

/// Solve `A X = B` for a matrix right-hand side.
pub fn solve_matrix(a: &CMatrix, b: &CMatrix) -> Option<CMatrix> {
    a.clone().lu().solve(b)
}

pub fn determinant(a: &CMatrix) -> C64 {
    a.clone().lu().determinant()
}

/// Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Reduce an angle to the principal branch (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut y = x - two_pi * (x / two_pi).round();
    if y <= -std::f64::consts::PI {
        y += two_pi;
    }
    if y > std::f64::consts::PI {
        y -= two_pi;
    }
    y
}

/// Distance between two angles modulo 2*pi.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Columns of `m` orthonormalized by modified Gram-Schmidt, in order.
pub fn orthonormalize_columns(m: &CMatrix) -> CMatrix {
    let (n, k) = m.shape();
    let mut q = m.clone();
    for j in 0..k {
        for p in 0..j {
            let proj = (q.column(p).adjoint() * q.column(j))[(0, 0)];
            let col_p = q.column(p).into_owned();
            let mut col_j = q.column_mut(j);
            col_j.zip_apply(&col_p, |x, y| *x -= proj * y);
        }
        let norm = q.column(j).norm();
        q.column_mut(j).scale_mut(1.0 / norm);
    }
    debug_assert_eq!(q.shape(), (n, k));
    q
}

/// Largest principal angle (radians) between the column spans of two
/// matrices with orthonormal columns.
pub fn max_principal_angle(a: &CMatrix, b: &CMatrix) -> f64 {
    let overlap = a.adjoint() * b;
    let gram = overlap.adjoint() * &overlap;
    let (vals, _) = eigh(&gram);
    let smallest = vals.first().copied().unwrap_or(0.0).clamp(0.0, 1.0);
    smallest.sqrt().acos()
}

/// Pauli matrices (2x2).
pub fn pauli() -> [CMatrix; 3] {
    let sx = CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)]);
    let sy = CMatrix::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)]);
    let sz = CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)]);
    [sx, sy, sz]
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigh_sorts_and_reconstructs() {
        let h = CMatrix::from_row_slice(
            3,
            3,
            &[
                cr(2.0),
                c(0.3, 0.7),
                c(-0.2, 0.1),
                c(0.3, -0.7),
                cr(-1.0),
                c(0.5, -0.4),
                c(-0.2, -0.1),
                c(0.5, 0.4),
                cr(0.5),
            ],
        );
        let (vals, vecs) = eigh(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let mut d = CMatrix::zeros(3, 3);
        for (k, &v) in vals.iter().enumerate() {
            d[(k, k)] = cr(v);
        }
        let rec = &vecs * d * vecs.adjoint();
        assert!(max_norm(&(rec - h)) < 1e-12);
    }

    #[test]
    fn expm_hermitian_is_unitary_for_imaginary_factor() {
        let h = CMatrix::from_row_slice(2, 2, &[cr(0.4), c(0.1, -0.9), c(0.1, 0.9), cr(-1.3)]);
        let u = expm_hermitian(&h, c(0.0, -1.0));
        assert!(unitarity_residual(&u) < 1e-13);
    }

    #[test]
    fn unitary_log_roundtrip() {
        let h = CMatrix::from_row_slice(2, 2, &[cr(0.2), c(0.3, 0.4), c(0.3, -0.4), cr(-0.7)]);
        let u = expm_hermitian(&h, c(0.0, 1.0));
        let k = unitary_log(&u).unwrap();
        let u2 = expm_hermitian(&k, c(0.0, 1.0));
        assert!(max_norm(&(u2 - u)) < 1e-11);
    }

    #[test]
    fn wrap_angle_principal_branch() {
        assert_relative_eq!(wrap_angle(3.0 * std::f64::consts::PI), std::f64::consts::PI);
        assert_relative_eq!(wrap_angle(-std::f64::consts::PI), std::f64::consts::PI);
        assert_relative_eq!(wrap_angle(0.1), 0.1);
    }
}
