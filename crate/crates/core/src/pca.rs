//! Baseline reducers: PCA, its sample-space variant, and the identity
//! feature selector.

use nalgebra::DMatrix;

use crate::data::{check_centered, ReductionModel};
use crate::error::{Error, Result};
use crate::linalg::{leading_eigvecs, normalize_column_signs, sym_eig};

fn check_k(x: &DMatrix<f64>, k: usize) -> Result<()> {
    let (n, d) = x.shape();
    if k == 0 || k > n.min(d) {
        return Err(Error::Parameter(format!(
            "subspace dimension {k} outside [1, {}]",
            n.min(d)
        )));
    }
    Ok(())
}

/// Classic PCA: W = the k leading eigenvectors of XᵀX, orthonormal.
///
/// Works on whichever Gram matrix is smaller. When n < d the directions
/// come from XXᵀ and are mapped back through Xᵀ; any direction with a zero
/// singular value is completed with an orthonormal filler.
pub fn fit_pca(x: &DMatrix<f64>, k: usize) -> Result<ReductionModel> {
    check_centered(x)?;
    check_k(x, k)?;
    let (n, d) = x.shape();
    let mut w = if d <= n {
        leading_eigvecs(&(x.transpose() * x), k)?
    } else {
        let spectrum = sym_eig(&(x * x.transpose()))?;
        let q = spectrum.leading(k)?;
        let values = spectrum.leading_values(k);
        let top = values.first().copied().unwrap_or(0.0).max(0.0);
        let mut w = x.transpose() * q;
        let mut rank = 0;
        for (j, value) in values.iter().enumerate() {
            if *value > top * 1e-12 && *value > 0.0 {
                let scale = value.sqrt();
                w.column_mut(j).scale_mut(1.0 / scale);
                rank = j + 1;
            } else {
                break;
            }
        }
        complete_columns(&mut w, rank);
        w
    };
    normalize_column_signs(&mut w);
    Ok(ReductionModel::new(w))
}

/// Replaces columns `from..` with unit vectors orthogonal to all earlier
/// columns (Gram–Schmidt over the standard basis).
fn complete_columns(w: &mut DMatrix<f64>, from: usize) {
    let (d, k) = w.shape();
    let mut filled = from;
    let mut e = 0;
    while filled < k && e < d {
        let mut v = nalgebra::DVector::zeros(d);
        v[e] = 1.0;
        for _ in 0..2 {
            for j in 0..filled {
                let proj = w.column(j).dot(&v);
                v -= w.column(j) * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            w.column_mut(filled).copy_from(&(v / norm));
            filled += 1;
        }
        e += 1;
    }
}

/// Variant PCA: Q = the k leading eigenvectors of XXᵀ and W = XᵀQ, which
/// equals the PCA directions scaled by their singular values.
pub fn fit_vpca(x: &DMatrix<f64>, k: usize) -> Result<ReductionModel> {
    check_centered(x)?;
    check_k(x, k)?;
    let q = leading_eigvecs(&(x * x.transpose()), k)?;
    let w = x.transpose() * &q;
    Ok(ReductionModel {
        w,
        q: Some(q),
        diagnostics: Default::default(),
    })
}

/// Projects `x_new` (centered with the training mean) onto the model.
pub fn transform(model: &ReductionModel, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    model.transform(x_new)
}

/// Identity projection I_{d×k}: keeps the first k features.
pub fn fit_baseline(d: usize, k: usize) -> Result<ReductionModel> {
    if k == 0 || k > d {
        return Err(Error::Parameter(format!(
            "baseline needs 1 ≤ k ≤ d, got k = {k}, d = {d}"
        )));
    }
    Ok(ReductionModel::new(DMatrix::identity(d, k)))
}

/// ‖X − XWWᵀ‖_F², the reconstruction residual of an orthonormal W.
pub fn residual(x: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    (x - x * w * w.transpose()).norm_squared()
}

/// Tr(WᵀXᵀXW), the variance captured by W.
pub fn captured_variance(x: &DMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    (x * w).norm_squared()
}

/// Divides every column by its sample standard deviation (constant columns
/// are left unchanged).
pub fn standardize_columns(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = z.clone();
    for j in 0..z.ncols() {
        let sd = crate::eval::column_std(z, j);
        out.column_mut(j).scale_mut(1.0 / sd);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    fn axis_data() -> DMatrix<f64> {
        DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 2.0, 0.0, -2.0, 0.0])
    }

    #[test]
    fn axis_aligned_pca() {
        let m = fit_pca(&axis_data(), 1).unwrap();
        assert_eq!(m.w.as_slice(), &[1.0, 0.0]);
        assert!(linalg::orthonormality_error(&m.w) < 1e-12);
    }

    #[test]
    fn axis_aligned_vpca() {
        let m = fit_vpca(&axis_data(), 1).unwrap();
        assert!((m.w[0].abs() - 10f64.sqrt()).abs() < 1e-12);
        assert!(m.w[1].abs() < 1e-12);
    }

    #[test]
    fn uncentered_and_bad_k_rejected() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(matches!(fit_pca(&x, 1), Err(Error::Contract(_))));
        assert!(matches!(fit_pca(&axis_data(), 3), Err(Error::Parameter(_))));
        assert!(matches!(fit_vpca(&axis_data(), 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn wide_data_pca_is_orthonormal_even_past_rank() {
        // n = 3 centered rows in d = 5 has rank 2; k = 3 forces completion
        let x = DMatrix::from_row_slice(
            3,
            5,
            &[1.0, 2.0, 0.0, 1.0, -1.0, -2.0, 0.5, 1.0, 0.0, 2.0, 1.0, -2.5, -1.0, -1.0, -1.0],
        );
        let m = fit_pca(&x, 3).unwrap();
        assert!(linalg::orthonormality_error(&m.w) < 1e-10);
    }

    #[test]
    fn baseline_examples() {
        let m = fit_baseline(3, 2).unwrap();
        assert_eq!(m.w, DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]));
        assert_eq!(fit_baseline(4, 4).unwrap().w, DMatrix::identity(4, 4));
        assert!(fit_baseline(2, 3).is_err());
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let z = transform(&m, &x).unwrap();
        assert_eq!(z, x.columns(0, 2).into_owned());
    }

    #[test]
    fn transform_checks_dimensions() {
        let m = fit_baseline(3, 2).unwrap();
        assert!(matches!(transform(&m, &DMatrix::zeros(2, 4)), Err(Error::Dimension(_))));
        assert_eq!(transform(&m, &DMatrix::zeros(2, 3)).unwrap(), DMatrix::zeros(2, 2));
    }
}
