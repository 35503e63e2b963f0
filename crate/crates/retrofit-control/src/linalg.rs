//! Low-level dense linear-algebra helpers: eigenvalues, singular values,
//! rank-revealing orthogonal bases, and complex linear solves.
//!
//! Singular values and bases are computed through the symmetric embedding
//! `[[0, M], [M^T, 0]]`, whose eigenvalues are the plus/minus singular-value
//! pairs of `M`. The symmetric eigensolver is accurate at full precision,
//! which matters here because rank splits separate magnitudes around 1e-12.

use nalgebra::{Complex, DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) type C64 = Complex<f64>;

/// Eigenvalues of a real square matrix via the real Schur form.
///
/// An empty matrix has an empty spectrum.
pub(crate) fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    debug_assert!(a.is_square());
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = a
        .clone()
        .try_schur(1e-14, 10_000)
        .ok_or_else(|| Error::NumericalDegeneracy("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().as_slice().to_vec())
}

/// Largest real part over a spectrum; `-inf` for an empty one.
pub(crate) fn spectral_abscissa(eigs: &[C64]) -> f64 {
    eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Singular values of `m` in descending order, together with the left
/// singular vectors of the leading `min(rows, cols)` values.
fn embedded_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return (Vec::new(), DMatrix::zeros(rows, 0));
    }
    let dim = rows + cols;
    let mut s = DMatrix::zeros(dim, dim);
    s.view_mut((0, rows), (rows, cols)).copy_from(m);
    s.view_mut((rows, 0), (cols, rows)).copy_from(&m.transpose());
    let eig = SymmetricEigen::new(s);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let mut values = Vec::with_capacity(k);
    let mut left = DMatrix::zeros(rows, k);
    for (out, &idx) in order.iter().take(k).enumerate() {
        values.push(eig.eigenvalues[idx].max(0.0));
        let col = eig.eigenvectors.column(idx);
        for r in 0..rows {
            left[(r, out)] = col[r] * std::f64::consts::SQRT_2;
        }
    }
    (values, left)
}

/// Singular values in descending order.
pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    embedded_svd(m).0
}

/// Smallest and largest singular values of a real matrix.
pub(crate) fn singular_extrema(m: &DMatrix<f64>) -> (f64, f64) {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) => (min, max),
        _ => (0.0, 0.0),
    }
}

/// Orthonormal basis of the column space of `m` (n x r, possibly r = 0).
///
/// Rank decisions use `rel_tol` relative to the largest singular value; the
/// extracted directions are re-orthonormalized with a Householder QR pass.
pub(crate) fn image_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 || m.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let (values, left) = embedded_svd(m);
    let smax = values[0];
    if smax <= 0.0 || !smax.is_finite() {
        return DMatrix::zeros(n, 0);
    }
    let r = values.iter().filter(|&&s| s > rel_tol * smax).count();
    if r == 0 {
        return DMatrix::zeros(n, 0);
    }
    let raw = left.columns(0, r).into_owned();
    let qr = raw.qr();
    qr.q()
}

/// Orthonormal basis of the column space of `m`, together with an
/// orthonormal basis of its orthogonal complement in the ambient space.
///
/// The complement is recovered from the projector `I - UU^T`, whose
/// spectrum is perfectly separated, so the split stays clean even for
/// nearly rank-deficient input.
pub(crate) fn image_and_complement(
    m: &DMatrix<f64>,
    rel_tol: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let basis = image_basis(m, rel_tol);
    let r = basis.ncols();
    if r == 0 {
        return (basis, DMatrix::identity(n, n));
    }
    if r == n {
        return (basis, DMatrix::zeros(n, 0));
    }
    let projector = DMatrix::identity(n, n) - &basis * basis.transpose();
    let eig = SymmetricEigen::new(projector);
    let cols: Vec<usize> = (0..n).filter(|&j| eig.eigenvalues[j] > 0.5).collect();
    let mut comp = DMatrix::zeros(n, cols.len());
    for (k, &j) in cols.iter().enumerate() {
        comp.set_column(k, &eig.eigenvectors.column(j));
    }
    (basis, comp)
}

/// Orthonormal basis of the null space {x : m x = 0}.
pub(crate) fn kernel_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    image_and_complement(&m.transpose(), rel_tol).1
}

/// Numerical rank with a tolerance relative to the largest singular value.
pub(crate) fn rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        Some(&smax) if smax > 0.0 => sv.iter().filter(|&&s| s > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Reciprocal condition number sigma_min / sigma_max (0 when singular or empty).
pub(crate) fn rcond(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 && m.ncols() == 0 {
        return 1.0;
    }
    let (smin, smax) = singular_extrema(m);
    if smax <= 0.0 {
        return 0.0;
    }
    smin / smax
}

/// Smallest singular value of a complex matrix, via the Hermitian embedding.
pub(crate) fn complex_singular_extrema(m: &DMatrix<C64>) -> (f64, f64) {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return (0.0, 0.0);
    }
    let dim = rows + cols;
    let mut s = DMatrix::<C64>::zeros(dim, dim);
    s.view_mut((0, rows), (rows, cols)).copy_from(m);
    s.view_mut((rows, 0), (cols, rows)).copy_from(&m.adjoint());
    let eig = SymmetricEigen::new(s);
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    (values[k - 1].max(0.0), values[0].max(0.0))
}

/// Solve `a x = b` over the complex field, verifying the residual so that a
/// nearly singular system is reported instead of silently mis-solved.
pub(crate) fn solve_complex(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Option<DMatrix<C64>> {
    if a.nrows() == 0 {
        return Some(DMatrix::zeros(0, b.ncols()));
    }
    let lu = a.clone().lu();
    let x = lu.solve(b)?;
    let residual = (a * &x - b).norm();
    let scale = a.norm() * x.norm() + b.norm();
    if !residual.is_finite() || residual > 1e-6 * scale.max(1e-300) {
        return None;
    }
    Some(x)
}

/// Inverse of a real square matrix through LU, `None` when singular.
pub(crate) fn try_inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if a.nrows() == 0 {
        return Some(a.clone());
    }
    a.clone().lu().try_inverse()
}

pub(crate) fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigenvalues_of_companion() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]);
        let mut eigs = eigenvalues(&a).unwrap();
        eigs.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap());
        assert_abs_diff_eq!(eigs[0].re, -2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eigs[1].re, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn empty_spectrum() {
        let a = DMatrix::<f64>::zeros(0, 0);
        assert!(eigenvalues(&a).unwrap().is_empty());
        assert_eq!(spectral_abscissa(&[]), f64::NEG_INFINITY);
    }

    #[test]
    fn embedded_singular_values_match_known() {
        // singular values of [[3, 0], [0, 4], [0, 0]] are 4, 3
        let m = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 4.0, 0.0, 0.0]);
        let sv = singular_values(&m);
        assert_abs_diff_eq!(sv[0], 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sv[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn image_basis_spans_range() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 1.0, 2.0]);
        let basis = image_basis(&m, 1e-10);
        assert_eq!(basis.ncols(), 1);
        // basis reproduces the columns of m
        let proj = &basis * basis.transpose();
        assert!((&proj * &m - &m).norm() < 1e-12);
        // orthonormal
        assert!((basis.transpose() * &basis - DMatrix::identity(1, 1)).norm() < 1e-12);
    }

    #[test]
    fn image_and_complement_split() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 1.0, 2.0]);
        let (basis, comp) = image_and_complement(&m, 1e-10);
        assert_eq!(basis.ncols(), 1);
        assert_eq!(comp.ncols(), 2);
        let cross = basis.transpose() * &comp;
        assert!(cross.norm() < 1e-12);
        let full = DMatrix::from_fn(3, 3, |i, j| {
            if j < 1 {
                basis[(i, j)]
            } else {
                comp[(i, j - 1)]
            }
        });
        assert!(rcond(&full) > 0.99);
    }

    #[test]
    fn kernel_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, -1.0]);
        let k = kernel_basis(&m, 1e-12);
        assert_eq!(k.ncols(), 2);
        assert!((m * &k).norm() < 1e-12);
    }

    #[test]
    fn rcond_identity() {
        assert_abs_diff_eq!(rcond(&DMatrix::identity(4, 4)), 1.0, epsilon = 1e-12);
        assert_eq!(rcond(&DMatrix::zeros(2, 2)), 0.0);
    }

    #[test]
    fn basis_of_oblique_projector() {
        // an idempotent but non-symmetric matrix: its range must come out
        // invariant even though the matrix is far from normal
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 5.0, 0.0, 0.0]);
        assert!((&p * &p - &p).norm() < 1e-12);
        let basis = image_basis(&p, 1e-10);
        assert_eq!(basis.ncols(), 1);
        // range of p is span{e1}
        assert_abs_diff_eq!(basis[(0, 0)].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(basis[(1, 0)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn complex_extrema_detect_rank() {
        let m = to_complex(&DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0]));
        let (smin, smax) = complex_singular_extrema(&m);
        assert_abs_diff_eq!(smax, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(smin, 1.0, epsilon = 1e-12);
    }
}
