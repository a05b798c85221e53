//! Projected clustering with adaptive neighbors.
//!
//! Alternates between a projection W (trailing generalized eigenvectors of
//! (XᵀLX, XᵀX)), an embedding F (trailing eigenvectors of L) and the
//! similarity graph S, doubling or halving λ until the Laplacian has
//! exactly `c` near-zero eigenvalues.

use nalgebra::DMatrix;

use crate::data::{check_centered, FitDiagnostics, ReductionModel};
use crate::error::{Error, Result};
use crate::graph::{
    graph_objective, rank_adjust, row_gammas, similarity_from, symmetrize, NeighborDistances,
    RankControlState, RankStep, SimilarityGraph, DEFAULT_NEIGHBORS,
};
use crate::linalg::{laplacian, laplacian_nullity, pairwise_sq_dists, sym_eig, EPS};
use crate::sdspca::{DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct PcanParams {
    pub k: usize,
    /// Target number of clusters.
    pub c: usize,
    pub m: usize,
    pub eps: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Ridge added to XᵀX; `None` means 1e-8·Tr(XᵀX)/d.
    pub ridge: Option<f64>,
}

impl PcanParams {
    pub fn new(k: usize, c: usize) -> Self {
        Self {
            k,
            c,
            m: DEFAULT_NEIGHBORS,
            eps: EPS,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            ridge: None,
        }
    }

    fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.k == 0 || self.k > d {
            return Err(Error::Parameter(format!(
                "subspace dimension {} outside [1, {d}]",
                self.k
            )));
        }
        if self.c < 2 || self.c >= n {
            return Err(Error::Parameter(format!(
                "cluster count {} must satisfy 2 ≤ c < n = {n}",
                self.c
            )));
        }
        if self.m == 0 || self.m + 2 > n {
            return Err(Error::Parameter(format!(
                "neighbor count {} must satisfy 1 ≤ m ≤ n − 2 = {}",
                self.m,
                n as i64 - 2
            )));
        }
        if let Some(r) = self.ridge {
            if !(r > 0.0) {
                return Err(Error::Parameter(format!("ridge must be positive, got {r}")));
            }
        }
        if !(self.eps > 0.0) || !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Parameter(
                "eps and tol must be positive and max_iter at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Default ridge 1e-8·Tr(XᵀX)/d (never below the smallest positive f64).
pub fn default_ridge(x: &DMatrix<f64>) -> f64 {
    let d = x.ncols().max(1) as f64;
    (1e-8 * x.norm_squared() / d).max(f64::MIN_POSITIVE)
}

/// W minimizing Tr(WᵀXᵀLXW) subject to Wᵀ(XᵀX + ridge·I)W = I.
///
/// Solved as the symmetric-definite pencil (XᵀLX, XᵀX + ridge·I) through
/// a Cholesky factor B = CCᵀ: the eigenvectors V of C⁻¹(XᵀLX)C⁻ᵀ map back
/// as W = C⁻ᵀV.
pub fn generalized_trailing_step(
    x: &DMatrix<f64>,
    l: &DMatrix<f64>,
    k: usize,
    ridge: f64,
) -> Result<DMatrix<f64>> {
    let (n, d) = x.shape();
    if l.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "Laplacian is {:?}, expected {n}x{n}",
            l.shape()
        )));
    }
    if k == 0 || k > d {
        return Err(Error::Parameter(format!("subspace dimension {k} outside [1, {d}]")));
    }
    if !(ridge > 0.0) {
        return Err(Error::Parameter(format!("ridge must be positive, got {ridge}")));
    }
    let mut b = x.transpose() * x;
    for i in 0..d {
        b[(i, i)] += ridge;
    }
    let a = x.transpose() * l * x;
    let chol = b
        .cholesky()
        .ok_or_else(|| Error::Numeric("XᵀX + ridge·I is not positive definite".into()))?;
    let c = chol.l();
    // C⁻¹ A C⁻ᵀ
    let left = c
        .solve_lower_triangular(&a)
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let reduced = c
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let v = sym_eig(&reduced)?.trailing(k)?;
    c.transpose()
        .solve_upper_triangular(&v)
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))
}

/// 2Tr(WᵀXᵀLXW) + Σ_i γ_i‖s_i‖² + 2λTr(FᵀLF).
pub fn pcan_objective(
    projected: &DMatrix<f64>,
    f: &DMatrix<f64>,
    l: &DMatrix<f64>,
    s: &DMatrix<f64>,
    gammas: &[f64],
    lambda: f64,
) -> f64 {
    let proj = (projected.transpose() * l * projected).trace();
    let emb = (f.transpose() * l * f).trace();
    let reg: f64 = gammas
        .iter()
        .enumerate()
        .map(|(i, g)| g * s.row(i).norm_squared())
        .sum();
    2.0 * proj + reg + 2.0 * lambda * emb
}

struct Iterate {
    w: DMatrix<f64>,
    s: DMatrix<f64>,
    objective: f64,
    lambda: f64,
    components: usize,
}

/// Fits the unsupervised projection and its adaptive graph.
///
/// On success the returned graph's Laplacian has exactly `c` near-zero
/// eigenvalues. If λ never settles within `max_iter` iterations the
/// iterate with the lowest objective is returned and the diagnostics are
/// flagged as not converged.
pub fn fit_pcan(
    x: &DMatrix<f64>,
    params: &PcanParams,
) -> Result<(ReductionModel, SimilarityGraph)> {
    let (n, d) = x.shape();
    check_centered(x)?;
    params.validate(n, d)?;
    let ridge = params.ridge.unwrap_or_else(|| default_ridge(x));

    let mut dist = NeighborDistances::new(&pairwise_sq_dists(x), None, 1.0)?;
    let mut s = similarity_from(&dist, params.m, params.eps)?.into_matrix();
    let mut rank = RankControlState::new(params.c, params.tol)?;
    let mut diagnostics = FitDiagnostics::default();
    let mut best: Option<Iterate> = None;
    let mut finished: Option<Iterate> = None;

    for t in 1..=params.max_iter {
        let s_sym = symmetrize(&s);
        let l = laplacian(&s_sym)?;
        let w = generalized_trailing_step(x, &l, params.k, ridge)?;
        let spectrum = sym_eig(&l)?;
        let f = spectrum.trailing(params.c)?;
        let eig: Vec<f64> = spectrum.eigenvalues.iter().copied().collect();

        let projected = x * &w;
        let gammas = row_gammas(&dist, params.m)?;
        let objective = pcan_objective(&projected, &f, &l, &s, &gammas, rank.lambda);
        let step = rank_adjust(&mut rank, &eig)?;
        diagnostics.iterations = t;
        diagnostics.objective.push(objective);
        diagnostics.lambda.push(rank.lambda);

        let current = Iterate {
            w,
            s: s.clone(),
            objective,
            lambda: rank.lambda,
            components: laplacian_nullity(&eig),
        };
        if step == RankStep::Converged {
            diagnostics.converged = true;
            finished = Some(current);
            break;
        }
        if best.as_ref().map_or(true, |b| objective < b.objective) {
            best = Some(current);
        }

        let df = pairwise_sq_dists(&f);
        dist = NeighborDistances::new(&pairwise_sq_dists(&projected), Some(&df), rank.lambda)?;
        let before = graph_objective(&dist, &s, &row_gammas(&dist, params.m)?);
        s = similarity_from(&dist, params.m, params.eps)?.into_matrix();
        let after = graph_objective(&dist, &s, &row_gammas(&dist, params.m)?);
        if after > before + 1e-9 * before.abs().max(1.0) {
            diagnostics.subproblem_violations += 1;
        }
    }

    let chosen = finished
        .or(best)
        .ok_or_else(|| Error::Parameter("max_iter must be at least 1".into()))?;
    diagnostics.final_lambda = Some(chosen.lambda);
    diagnostics.components = Some(chosen.components);
    let graph = SimilarityGraph::new(chosen.s, params.m)?;
    Ok((
        ReductionModel {
            w: chosen.w,
            q: None,
            diagnostics,
        },
        graph,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{count_components, make_blobs, BlobSpec};

    #[test]
    fn zero_laplacian_gives_feasible_w_with_zero_objective() {
        let (x, _) = make_blobs(&BlobSpec::new(6, 2, 3, 1, 3.0, 1));
        let l = DMatrix::zeros(x.nrows(), x.nrows());
        let ridge = default_ridge(&x);
        let w = generalized_trailing_step(&x, &l, 2, ridge).unwrap();
        let mut b = x.transpose() * &x;
        for i in 0..b.nrows() {
            b[(i, i)] += ridge;
        }
        assert!((w.transpose() * b * &w - DMatrix::identity(2, 2)).amax() < 1e-6);
        assert!((w.transpose() * x.transpose() * l * &x * &w).trace().abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_cluster_count() {
        let (x, _) = make_blobs(&BlobSpec::new(4, 2, 2, 0, 5.0, 2));
        let n = x.nrows();
        assert!(matches!(fit_pcan(&x, &PcanParams::new(1, n)), Err(Error::Parameter(_))));
        let mut p = PcanParams::new(1, 2);
        p.m = n - 1;
        assert!(matches!(fit_pcan(&x, &p), Err(Error::Parameter(_))));
    }

    #[test]
    fn separated_blobs_form_two_components() {
        let (x, _) = make_blobs(&BlobSpec::new(20, 2, 3, 2, 10.0, 3));
        let mut p = PcanParams::new(2, 2);
        p.m = 3;
        let (model, graph) = fit_pcan(&x, &p).unwrap();
        assert!(model.diagnostics.converged);
        assert_eq!(count_components(&graph.symmetrized(), 0.0), 2);
        assert_eq!(model.diagnostics.components, Some(2));
        for row in graph.matrix().row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-8);
        }
    }
}
