//! Oracle cross-checks for `fit --verify` on small inputs.

use nalgebra::DMatrix;
use subspace_core::graph::{optimal_gamma, simplex_row};
use subspace_core::linalg::{laplacian, laplacian_nullity, orthonormality_error, pairwise_sq_dists, svd, sym_eig, EPS};
use subspace_core::pca::{fit_pca, fit_vpca};
use subspace_core::synth::{count_components, qp_simplex_oracle};
use subspace_core::{ReductionModel, Result, SimilarityGraph};

pub const MAX_VERIFY_N: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

/// Closed-form simplex rows of the raw-distance graph against the QP oracle.
pub fn check_simplex_rows(x: &DMatrix<f64>, m: usize) -> Result<Check> {
    let dist = pairwise_sq_dists(x);
    let n = x.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n.min(25) {
        let row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| dist[(i, j)]).collect();
        let mut sorted = row.clone();
        sorted.sort_by(f64::total_cmp);
        let gamma = optimal_gamma(&sorted, m)?;
        if !(gamma > 0.0) {
            // tied neighbors: the closed form falls back to uniform weights
            continue;
        }
        let closed = simplex_row(&row, m, EPS)?;
        let oracle = qp_simplex_oracle(&row, gamma)?;
        for (a, b) in closed.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(Check {
        name: "simplex rows vs QP oracle",
        passed: worst <= 1e-6,
        detail: format!("max deviation {worst:.2e}"),
    })
}

/// Union-find components of the learned graph against the Laplacian nullity.
pub fn check_components(graph: &SimilarityGraph) -> Result<Check> {
    let s = graph.symmetrized();
    let uf = count_components(&s, 0.0);
    let eig: Vec<f64> = sym_eig(&laplacian(&s)?)?.eigenvalues.iter().copied().collect();
    let spectral = laplacian_nullity(&eig);
    Ok(Check {
        name: "graph components",
        passed: uf == spectral,
        detail: format!("union-find {uf}, zero eigenvalues {spectral}"),
    })
}

/// W_vPCA = W_PCA·Σ_{1:k} after per-column sign alignment.
pub fn check_vpca(x: &DMatrix<f64>, k: usize) -> Result<Check> {
    let wp = fit_pca(x, k)?.w;
    let wv = fit_vpca(x, k)?.w;
    let sigma = svd(x)?.sigma;
    let mut scaled = wp.clone();
    for j in 0..k {
        let mut col = wp.column(j) * sigma[j];
        if col.dot(&wv.column(j)) < 0.0 {
            col = -col;
        }
        scaled.set_column(j, &col);
    }
    let rel = (&wv - &scaled).norm() / wv.norm().max(f64::MIN_POSITIVE);
    Ok(Check {
        name: "vPCA = PCA·Σ",
        passed: rel <= 1e-8,
        detail: format!("relative deviation {rel:.2e}"),
    })
}

pub fn check_orthonormal(model: &ReductionModel) -> Option<Check> {
    model.q.as_ref().map(|q| {
        let err = orthonormality_error(q);
        Check {
            name: "Q orthonormal",
            passed: err <= 1e-8,
            detail: format!("max |QᵀQ − I| {err:.2e}"),
        }
    })
}

/// All checks for a fit on centered `x`. Returns `None` above
/// [`MAX_VERIFY_N`] samples.
pub fn verify_fit(
    x: &DMatrix<f64>,
    model: &ReductionModel,
    graph: Option<&SimilarityGraph>,
    m: usize,
) -> Result<Option<Vec<Check>>> {
    let n = x.nrows();
    if n > MAX_VERIFY_N {
        return Ok(None);
    }
    let mut checks = Vec::new();
    if m + 2 <= n {
        checks.push(check_simplex_rows(x, m)?);
    }
    if let Some(g) = graph {
        checks.push(check_components(g)?);
    }
    let k = model.k().min(n.saturating_sub(1)).min(x.ncols());
    if k > 0 {
        checks.push(check_vpca(x, k)?);
    }
    checks.extend(check_orthonormal(model));
    Ok(Some(checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use subspace_core::sdspcaan::{fit_sdspcaan, SdspcaanParams};
    use subspace_core::synth::{make_blobs, BlobSpec};

    fn centered(n_per_class: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let (mut x, y) = make_blobs(&BlobSpec::new(n_per_class, 2, 3, 3, 5.0, 4));
        let mean = x.row_mean();
        for mut row in x.row_iter_mut() {
            row -= &mean;
        }
        (x, y)
    }

    #[test]
    fn small_fit_passes_every_check() {
        let (x, y) = centered(10);
        let (model, graph) = fit_sdspcaan(&x, &y, &SdspcaanParams::new(2, 1.0, 1.0, 1.0)).unwrap();
        let checks = verify_fit(&x, &model, Some(&graph), 5).unwrap().unwrap();
        assert_eq!(checks.len(), 4);
        for c in &checks {
            assert!(c.passed, "{c}");
            assert!(c.to_string().starts_with("[PASS] "));
        }
    }

    #[test]
    fn large_inputs_are_skipped() {
        let (x, _) = centered(MAX_VERIFY_N / 2 + 1);
        let model = fit_pca(&x, 2).unwrap();
        assert!(verify_fit(&x, &model, None, 5).unwrap().is_none());
    }

    #[test]
    fn failing_check_is_tagged() {
        let mut q = DMatrix::identity(3, 2);
        q[(0, 1)] = 0.5;
        let model = ReductionModel { w: q.clone(), q: Some(q), diagnostics: Default::default() };
        let c = check_orthonormal(&model).unwrap();
        assert!(!c.passed);
        assert!(c.to_string().starts_with("[FAIL] Q orthonormal"));
    }
}
