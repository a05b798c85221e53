//! Dense linear-algebra primitives shared by every reducer.
//!
//! Eigendecompositions are backed by nalgebra's symmetric QR solver; this
//! module adds the ordering and sign conventions the fits rely on:
//! eigenvalues ascending, ties kept in solver order, and each eigenvector
//! flipped so its largest-magnitude entry is positive (lowest index wins a
//! magnitude tie). Repeated factorizations of the same matrix therefore give
//! bitwise-identical vectors. Inside a degenerate eigenspace the individual
//! vectors are not meaningful; compare subspaces with [`principal_angles`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Machine epsilon for f64, the default reweighting constant.
pub const EPS: f64 = f64::EPSILON;

/// Full spectrum of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricSpectrum {
    pub eigenvalues: DVector<f64>,
    /// Column `j` pairs with `eigenvalues[j]`.
    pub eigenvectors: DMatrix<f64>,
}

impl SymmetricSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Eigenvectors of the `k` smallest eigenvalues, ascending.
    pub fn trailing(&self, k: usize) -> Result<DMatrix<f64>> {
        check_count(k, self.dim())?;
        Ok(self.eigenvectors.columns(0, k).into_owned())
    }

    /// Eigenvectors of the `k` largest eigenvalues, descending.
    pub fn leading(&self, k: usize) -> Result<DMatrix<f64>> {
        check_count(k, self.dim())?;
        let n = self.dim();
        Ok(DMatrix::from_fn(n, k, |i, j| self.eigenvectors[(i, n - 1 - j)]))
    }

    /// The `k` largest eigenvalues, descending.
    pub fn leading_values(&self, k: usize) -> Vec<f64> {
        self.eigenvalues.iter().rev().take(k).copied().collect()
    }
}

/// Singular value decomposition `X = U Σ Rᵀ` with full orthogonal factors.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// n×n orthogonal.
    pub u: DMatrix<f64>,
    /// min(n, d) singular values, descending.
    pub sigma: DVector<f64>,
    /// d×d orthogonal.
    pub r: DMatrix<f64>,
}

impl SvdFactors {
    /// Σ as an n×d rectangular diagonal matrix.
    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.u.nrows(), self.r.nrows());
        for (i, v) in self.sigma.iter().enumerate() {
            s[(i, i)] = *v;
        }
        s
    }

    /// First `k` right singular vectors, R_{1:k}.
    pub fn r_leading(&self, k: usize) -> DMatrix<f64> {
        self.r.columns(0, k).into_owned()
    }
}

fn check_count(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Parameter(format!(
            "eigenvector count {k} outside [1, {n}]"
        )));
    }
    Ok(())
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(what.to_string()))
    }
}

/// True when the largest-magnitude entry (lowest index on ties) is negative.
fn needs_flip<'a>(col: impl Iterator<Item = &'a f64>) -> bool {
    let mut best = 0.0_f64;
    for v in col {
        if v.abs() > best.abs() {
            best = *v;
        }
    }
    best < 0.0
}

fn normalize_sign(mut col: nalgebra::DVectorViewMut<'_, f64>) {
    if needs_flip(col.iter()) {
        col.neg_mut();
    }
}

/// Applies the eigenvector sign convention to every column of `m`.
pub fn normalize_column_signs(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        normalize_sign(m.column_mut(j));
    }
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
///
/// The input is symmetrized as (A+Aᵀ)/2 first.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<SymmetricSpectrum> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a, "eigendecomposition input")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(SymmetricSpectrum {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .total_cmp(&eig.eigenvalues[j])
            .then(i.cmp(&j))
    });

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = eig.eigenvectors.select_columns(order.iter());
    normalize_column_signs(&mut eigenvectors);
    Ok(SymmetricSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigenvalues only, ascending. Cheaper than [`sym_eig`] when the vectors
/// are not needed.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a, "eigenvalue input")?;
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    let sym = (a + a.transpose()) * 0.5;
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

/// Eigenvectors of the `k` smallest eigenvalues, ascending.
pub fn trailing_eigvecs(a: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    check_count(k, a.nrows())?;
    sym_eig(a)?.trailing(k)
}

/// Rotates `q` inside each cluster of repeated eigenvalues to best match
/// `reference` (orthogonal Procrustes per cluster).
///
/// Eigenvectors of a repeated eigenvalue are only defined up to rotation,
/// so rounding can spin them between otherwise identical solves. Columns
/// stay eigenvectors and the span is unchanged. Two eigenvalues belong to
/// one cluster when they differ by at most `rel_tol` times the largest
/// magnitude in `eigenvalues`.
pub fn align_repeated_eigvecs(
    q: &mut DMatrix<f64>,
    eigenvalues: &[f64],
    reference: &DMatrix<f64>,
    rel_tol: f64,
) -> Result<()> {
    if q.shape() != reference.shape() || eigenvalues.len() < q.ncols() {
        return Err(Error::Dimension(format!(
            "cannot align {}x{} to {}x{} with {} eigenvalues",
            q.nrows(),
            q.ncols(),
            reference.nrows(),
            reference.ncols(),
            eigenvalues.len()
        )));
    }
    let scale = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = rel_tol * scale;
    let k = q.ncols();
    let mut start = 0;
    while start < k {
        let mut end = start + 1;
        while end < k && eigenvalues[end] - eigenvalues[end - 1] <= gap {
            end += 1;
        }
        let width = end - start;
        if width > 1 {
            let block = q.columns(start, width).into_owned();
            let overlap = block.transpose() * reference.columns(start, width);
            let svd = overlap.svd(true, true);
            let (u, v_t) = svd.u.zip(svd.v_t).ok_or_else(|| {
                Error::Contract("Procrustes SVD did not return factors".into())
            })?;
            q.columns_mut(start, width).copy_from(&(block * u * v_t));
        }
        start = end;
    }
    Ok(())
}

/// Eigenvectors of the `k` largest eigenvalues, descending.
pub fn leading_eigvecs(a: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    check_count(k, a.nrows())?;
    sym_eig(a)?.leading(k)
}

/// Extends orthonormal columns `basis` (n×p) to an n×n orthogonal matrix.
fn complete_basis(basis: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = basis.nrows();
    let p = basis.ncols();
    if p == n {
        return Ok(basis.clone());
    }
    // I − UUᵀ has eigenvalue 1 on exactly the orthogonal complement.
    let projector = DMatrix::identity(n, n) - basis * basis.transpose();
    let complement = leading_eigvecs(&projector, n - p)?;
    let mut full = DMatrix::zeros(n, n);
    full.columns_mut(0, p).copy_from(basis);
    full.columns_mut(p, n - p).copy_from(&complement);
    Ok(full)
}

/// Singular value decomposition with full U (n×n) and R (d×d).
///
/// Singular values are descending; each column of R follows the sign
/// convention and the matching column of U is flipped along with it.
pub fn svd(x: &DMatrix<f64>) -> Result<SvdFactors> {
    check_finite(x, "svd input")?;
    let (n, d) = x.shape();
    let p = n.min(d);
    if p == 0 {
        return Ok(SvdFactors {
            u: DMatrix::identity(n, n),
            sigma: DVector::zeros(0),
            r: DMatrix::identity(d, d),
        });
    }
    let dec = x.clone().svd(true, true);
    let u_thin = dec
        .u
        .ok_or_else(|| Error::Numeric("svd did not return U".into()))?;
    let v_t = dec
        .v_t
        .ok_or_else(|| Error::Numeric("svd did not return Vᵀ".into()))?;
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| {
        dec.singular_values[j]
            .total_cmp(&dec.singular_values[i])
            .then(i.cmp(&j))
    });
    let sigma = DVector::from_iterator(p, order.iter().map(|&i| dec.singular_values[i]));
    let mut u_thin = u_thin.select_columns(order.iter());
    let mut r_thin = v_t.transpose().select_columns(order.iter());
    for j in 0..p {
        if needs_flip(r_thin.column(j).iter()) {
            r_thin.column_mut(j).neg_mut();
            u_thin.column_mut(j).neg_mut();
        }
    }
    Ok(SvdFactors {
        u: complete_basis(&u_thin)?,
        sigma,
        r: complete_basis(&r_thin)?,
    })
}

/// Frobenius norm.
pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// Sum of row Euclidean norms, ‖Q‖_{2,1}.
pub fn l21_norm(q: &DMatrix<f64>) -> f64 {
    q.row_iter().map(|row| row.norm()).sum()
}

/// Sum of absolute entries, ‖Q‖_{1,1}.
pub fn l11_norm(q: &DMatrix<f64>) -> f64 {
    q.iter().map(|v| v.abs()).sum()
}

/// Diagonal of the L2,1 reweighting matrix: D_ii = 1 / (2·√(‖q_i‖² + eps)).
pub fn reweight_diag(q: &DMatrix<f64>, eps: f64) -> Result<DVector<f64>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Parameter(format!(
            "reweighting constant must be positive, got {eps}"
        )));
    }
    Ok(DVector::from_iterator(
        q.nrows(),
        q.row_iter()
            .map(|row| 1.0 / (2.0 * (row.norm_squared() + eps).sqrt())),
    ))
}

/// Graph Laplacian L = diag(S·1) − S.
pub fn laplacian(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !s.is_square() {
        return Err(Error::Dimension(format!(
            "laplacian needs a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    if let Some(v) = s.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Domain(format!(
            "similarity entries must be nonnegative, found {v}"
        )));
    }
    let mut l = -s;
    for (i, row) in s.row_iter().enumerate() {
        l[(i, i)] += row.sum();
    }
    Ok(l)
}

/// Number of eigenvalues at or below `threshold`.
pub fn count_near_zero(eigenvalues: &[f64], threshold: f64) -> usize {
    eigenvalues.iter().filter(|e| **e <= threshold).count()
}

/// Number of zero eigenvalues of a Laplacian, with the threshold
/// 1e-8·λ_max. An all-zero spectrum counts every eigenvalue as zero.
pub fn laplacian_nullity(eigenvalues: &[f64]) -> usize {
    let max = eigenvalues.iter().copied().fold(0.0_f64, f64::max);
    count_near_zero(eigenvalues, 1e-8 * max)
}

/// Orthonormal basis for the column span of `m` (thin QR).
pub fn orthonormal_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}

/// Principal angles between the column spans of `a` and `b`, ascending.
///
/// Both inputs must have the same shape; columns need not be orthonormal.
/// Angles come from atan2 of paired sines and cosines so they stay
/// accurate near zero.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "principal angles need equal shapes, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let k = a.ncols();
    if k == 0 {
        return Ok(Vec::new());
    }
    let qa = orthonormal_basis(a);
    let qb = orthonormal_basis(b);
    let cross = qa.transpose() * &qb;
    let residual = &qb - &qa * &cross;
    let mut cosines: Vec<f64> = cross.singular_values().iter().copied().collect();
    let mut sines: Vec<f64> = residual.singular_values().iter().copied().collect();
    cosines.sort_by(|x, y| y.total_cmp(x));
    sines.sort_by(|x, y| x.total_cmp(y));
    Ok(cosines
        .iter()
        .zip(&sines)
        .map(|(c, s)| s.min(1.0).atan2(c.min(1.0)))
        .collect())
}

/// Largest principal angle between two column spans.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    Ok(principal_angles(a, b)?
        .into_iter()
        .fold(0.0_f64, f64::max))
}

/// Squared Euclidean distances between the rows of `points`.
///
/// Computed entry by entry so the result is exactly symmetric with a zero
/// diagonal.
pub fn pairwise_sq_dists(points: &DMatrix<f64>) -> DMatrix<f64> {
    let n = points.nrows();
    let t = points.transpose();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = t.column(i);
        for j in (i + 1)..n {
            let xj = t.column(j);
            let d: f64 = xi.iter().zip(xj.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            out[(i, j)] = d;
            out[(j, i)] = d;
        }
    }
    out
}

/// Maximum absolute entry of QᵀQ − I.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let gram = q.transpose() * q;
    let k = gram.nrows();
    (gram - DMatrix::identity(k, k)).amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn diagonal_spectrum_is_sorted() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let s = sym_eig(&a).unwrap();
        assert_eq!(s.eigenvalues.as_slice(), &[1.0, 2.0]);
        assert_eq!(s.eigenvectors, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
    }

    #[test]
    fn eigenvalues_only_agree_with_full_decomposition() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
        let full = sym_eig(&a).unwrap();
        for (x, y) in sym_eigenvalues(&a).unwrap().iter().zip(full.eigenvalues.iter()) {
            assert_close(*x, *y, 1e-12);
        }
        assert!(sym_eigenvalues(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn alignment_undoes_a_rotation_inside_a_repeated_eigenvalue() {
        let a = DMatrix::from_diagonal(&DVector::from_row_slice(&[0.0, 0.0, 0.0, 2.0, 5.0]));
        let spec = sym_eig(&a).unwrap();
        let reference = spec.trailing(4).unwrap();
        let (c, s) = (0.6f64, 0.8f64);
        let mut rot = DMatrix::identity(4, 4);
        rot[(0, 0)] = c;
        rot[(0, 2)] = -s;
        rot[(2, 0)] = s;
        rot[(2, 2)] = c;
        let mut q = &reference * rot;
        align_repeated_eigvecs(&mut q, spec.eigenvalues.as_slice(), &reference, 1e-9).unwrap();
        assert!((&q - &reference).abs().max() < 1e-12);
        // the isolated eigenvector is never rotated
        let mut flipped = reference.clone();
        flipped.column_mut(3).neg_mut();
        align_repeated_eigvecs(&mut flipped, spec.eigenvalues.as_slice(), &reference, 1e-9).unwrap();
        assert_eq!(flipped.column(3), -reference.column(3));
    }

    #[test]
    fn identity_spectrum_keeps_identity_columns() {
        let s = sym_eig(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(s.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(s.eigenvectors, DMatrix::identity(3, 3));
        let t = trailing_eigvecs(&DMatrix::identity(4, 4), 2).unwrap();
        assert_eq!(t, DMatrix::identity(4, 2));
    }

    #[test]
    fn swap_matrix_eigenvalues() {
        // characteristic polynomial λ² − 1
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let s = sym_eig(&a).unwrap();
        assert_close(s.eigenvalues[0], -1.0, 1e-14);
        assert_close(s.eigenvalues[1], 1.0, 1e-14);
    }

    #[test]
    fn eig_rejects_bad_input() {
        assert!(matches!(
            sym_eig(&DMatrix::zeros(2, 3)),
            Err(Error::Dimension(_))
        ));
        let mut a = DMatrix::identity(2, 2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(sym_eig(&a), Err(Error::Numeric(_))));
    }

    #[test]
    fn trailing_and_leading_pick_ends() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert_eq!(trailing_eigvecs(&a, 1).unwrap().as_slice(), &[0.0, 1.0]);
        assert_eq!(leading_eigvecs(&a, 1).unwrap().as_slice(), &[1.0, 0.0]);
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let t = trailing_eigvecs(&b, 2).unwrap();
        let full = sym_eig(&b).unwrap();
        assert_eq!(t, full.eigenvectors.columns(0, 2).into_owned());
        assert_eq!(t.column(0).as_slice(), &[0.0, 0.0, 1.0]);
        assert_eq!(t.column(1).as_slice(), &[0.0, 1.0, 0.0]);
        assert!(matches!(trailing_eigvecs(&a, 0), Err(Error::Parameter(_))));
        assert!(matches!(leading_eigvecs(&a, 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn svd_examples() {
        let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        assert_eq!(svd(&d).unwrap().sigma.as_slice(), &[3.0, 1.0]);

        let z = svd(&DMatrix::zeros(3, 2)).unwrap();
        assert!(z.sigma.iter().all(|v| *v == 0.0));

        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 2.0, 0.0, -2.0, 0.0]);
        let f = svd(&x).unwrap();
        assert_close(f.sigma[0], 10f64.sqrt(), 1e-12);
        assert_close(f.sigma[1], 0.0, 1e-12);
        let rebuilt = &f.u * f.sigma_matrix() * f.r.transpose();
        assert!((rebuilt - &x).norm() <= 1e-12);
        assert!((f.u.transpose() * &f.u - DMatrix::identity(4, 4)).amax() < 1e-12);
    }

    #[test]
    fn l21_examples() {
        assert_eq!(l21_norm(&DMatrix::identity(2, 2)), 2.0);
        assert_eq!(l21_norm(&DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 0.0])), 5.0);
        assert_eq!(l21_norm(&DMatrix::zeros(3, 2)), 0.0);
    }

    #[test]
    fn reweight_examples() {
        let q = DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 0.0]);
        let d = reweight_diag(&q, 1e-300).unwrap();
        assert_close(d[0], 0.1, 1e-15);
        let d = reweight_diag(&q, 1.0).unwrap();
        assert_eq!(d[1], 0.5);
        let d = reweight_diag(&DMatrix::zeros(3, 2), EPS).unwrap();
        // 1 / (2·2⁻²⁶) = 2²⁵
        assert!(d.iter().all(|v| *v == 33554432.0));
        assert!(matches!(reweight_diag(&q, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(reweight_diag(&q, -1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn laplacian_examples() {
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(
            laplacian(&s).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
        );
        assert_eq!(laplacian(&DMatrix::zeros(3, 3)).unwrap(), DMatrix::zeros(3, 3));
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        assert!(matches!(laplacian(&bad), Err(Error::Domain(_))));
    }

    #[test]
    fn principal_angles_of_identical_and_orthogonal_spans() {
        let a = DMatrix::identity(4, 2);
        let mut b = a.clone() * 3.0;
        b.swap_columns(0, 1);
        assert!(max_principal_angle(&a, &b).unwrap() < 1e-15);
        let c = DMatrix::from_fn(4, 2, |i, j| if i == j + 2 { 1.0 } else { 0.0 });
        let angles = principal_angles(&a, &c).unwrap();
        assert!(angles.iter().all(|t| (t - std::f64::consts::FRAC_PI_2).abs() < 1e-12));
    }

    #[test]
    fn pairwise_distances() {
        let p = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 3.0, 4.0, 0.0, 1.0]);
        let d = pairwise_sq_dists(&p);
        assert_eq!(d[(0, 1)], 25.0);
        assert_eq!(d[(1, 2)], 18.0);
        assert_eq!(d[(2, 2)], 0.0);
        assert_eq!(d, d.transpose());
    }
}
