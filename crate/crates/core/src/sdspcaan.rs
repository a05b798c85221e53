//! Supervised discriminative sparse PCA with adaptive neighbors.
//!
//! Joint optimization of the orthonormal factor Q and a similarity graph S:
//!
//! * Q-step: trailing eigenvectors of
//!   Z = −XXᵀ − αYYᵀ + βD + δ·XXᵀLXXᵀ, with L the Laplacian of (S+Sᵀ)/2.
//! * S-step: closed-form simplex rows over
//!   d_ij = ‖Wᵀx_i − Wᵀx_j‖² + λ‖y_i − y_j‖², W = XᵀQ.
//! * λ doubles or halves until L has exactly `c` zero eigenvalues.
//!
//! Three degenerate variants share the loop: δ = 0 is plain SDSPCA,
//! [`Variant::FixedGraph`] keeps S at its initialization, and
//! [`Variant::SpcanOnly`] keeps only the graph term in Z.

use nalgebra::DMatrix;

use crate::data::{check_centered, validate_labels, FitDiagnostics, ReductionModel};
use crate::error::{Error, Result};
use crate::graph::{
    graph_objective, optimal_gamma, rank_adjust, row_gammas, similarity_from, symmetrize,
    NeighborDistances, RankControlState, RankStep, SimilarityGraph, DEFAULT_NEIGHBORS,
};
use crate::linalg::{
    align_repeated_eigvecs, l11_norm, laplacian, laplacian_nullity, orthonormality_error,
    pairwise_sq_dists, sym_eig, sym_eigenvalues, EPS,
};
use crate::sdspca::{fit_sdspca, objective_terms, SdspcaParams, SdspcaState, DEFAULT_MAX_ITER, DEFAULT_TOL};

/// Relative eigenvalue gap under which Q-step eigenvectors count as one
/// repeated eigenspace and are aligned to the previous iterate.
const REPEAT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// The full joint model.
    #[default]
    Full,
    /// S frozen at its initialization (SDSPCA-LPP).
    FixedGraph,
    /// Only the graph term drives the Q-step (SPCAN).
    SpcanOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdspcaanParams {
    pub k: usize,
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub eps: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub variant: Variant,
}

impl SdspcaanParams {
    pub fn new(k: usize, alpha: f64, beta: f64, delta: f64) -> Self {
        Self {
            k,
            m: DEFAULT_NEIGHBORS,
            alpha,
            beta,
            delta,
            eps: EPS,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            variant: Variant::Full,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    fn sdspca(&self) -> SdspcaParams {
        SdspcaParams {
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            eps: self.eps,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    fn validate(&self, n: usize, d: usize) -> Result<()> {
        self.sdspca().validate(n, d)?;
        if !(self.delta >= 0.0) {
            return Err(Error::Parameter(format!(
                "delta must be nonnegative, got {}",
                self.delta
            )));
        }
        if self.m == 0 || self.m + 2 > n {
            return Err(Error::Parameter(format!(
                "neighbor count {} must satisfy 1 ≤ m ≤ n − 2 = {}",
                self.m,
                n as i64 - 2
            )));
        }
        Ok(())
    }
}

/// Squared label distances ‖y_i − y_j‖² (0 within a class, 2 across).
pub fn label_distances(y: &DMatrix<f64>) -> DMatrix<f64> {
    pairwise_sq_dists(y)
}

/// The graph built from raw squared distances, S's initial value.
pub fn initial_graph(x: &DMatrix<f64>, m: usize, eps: f64) -> Result<SimilarityGraph> {
    let dist = NeighborDistances::new(&pairwise_sq_dists(x), None, 1.0)?;
    similarity_from(&dist, m, eps)
}

/// G·L·G for G = XXᵀ.
fn graph_term(gram: &DMatrix<f64>, l: &DMatrix<f64>) -> DMatrix<f64> {
    let gl = gram * l;
    let mut out = &gl * gram;
    // symmetric in exact arithmetic
    let t = out.transpose();
    out += t;
    out * 0.5
}

/// Full objective: ‖X − QQᵀX‖² + α‖Y − QQᵀY‖² + β‖Q‖_{2,1}
/// + δ/2·[2Tr(QᵀXXᵀLXXᵀQ) + Σ_i γ_i‖s_i‖² + 2λTr(YᵀLY)].
///
/// L is the Laplacian of (S+Sᵀ)/2 and γ_i is recomputed from the
/// distances implied by Q and λ.
#[allow(clippy::too_many_arguments)]
pub fn sdspcaan_objective(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    q: &DMatrix<f64>,
    s: &DMatrix<f64>,
    alpha: f64,
    beta: f64,
    delta: f64,
    lambda: f64,
    m: usize,
) -> Result<f64> {
    let n = x.nrows();
    if q.nrows() != n || y.nrows() != n || s.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "inconsistent shapes: X {:?}, Y {:?}, Q {:?}, S {:?}",
            x.shape(),
            y.shape(),
            q.shape(),
            s.shape()
        )));
    }
    let err = orthonormality_error(q);
    if !(err <= 1e-6) {
        return Err(Error::Contract(format!(
            "Q must have orthonormal columns (‖QᵀQ − I‖_max = {err:.3e})"
        )));
    }
    let base = objective_terms(x, y, q, alpha, beta);
    if delta == 0.0 {
        return Ok(base);
    }
    let gram = x * x.transpose();
    let l = laplacian(&symmetrize(s))?;
    let projected = &gram * q;
    let dist = NeighborDistances::new(
        &pairwise_sq_dists(&projected),
        Some(&label_distances(y)),
        lambda,
    )?;
    let gammas = row_gammas(&dist, m)?;
    Ok(base + delta * bracket(&projected, y, &l, s, &gammas, lambda))
}

/// Half of the bracketed graph terms: Tr(PᵀLP) + ½Σγ_i‖s_i‖² + λTr(YᵀLY).
fn bracket(
    projected: &DMatrix<f64>,
    y: &DMatrix<f64>,
    l: &DMatrix<f64>,
    s: &DMatrix<f64>,
    gammas: &[f64],
    lambda: f64,
) -> f64 {
    let proj = (projected.transpose() * l * projected).trace();
    let labels = (y.transpose() * l * y).trace();
    let reg: f64 = gammas
        .iter()
        .enumerate()
        .map(|(i, g)| g * s.row(i).norm_squared())
        .sum();
    proj + 0.5 * reg + lambda * labels
}

/// Fits the joint model. Returns W = XᵀQ (with Q attached) and the final
/// row-stochastic graph.
///
/// With δ = 0 the graph plays no role and the fit is exactly
/// [`fit_sdspca`]; the returned graph is then the initial one.
pub fn fit_sdspcaan(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    params: &SdspcaanParams,
) -> Result<(ReductionModel, SimilarityGraph)> {
    let (n, d) = x.shape();
    check_centered(x)?;
    validate_labels(y, n)?;
    params.validate(n, d)?;
    let c = y.ncols();
    let spcan = params.variant == Variant::SpcanOnly;

    let initial = initial_graph(x, params.m, params.eps)?;
    if params.delta == 0.0 && !spcan {
        let model = fit_sdspca(x, y, &params.sdspca())?;
        return Ok((model, initial));
    }

    let gram = x * x.transpose();
    let label_dist = label_distances(y);
    let mut state = SdspcaState::new(x, y, params.alpha, params.k);
    let mut s = initial.matrix().clone();
    let mut dist = NeighborDistances::new(&pairwise_sq_dists(x), None, 1.0)?;
    let mut rank = RankControlState::new(c, params.tol)?;
    let mut diagnostics = FitDiagnostics::default();
    let mut q = state.q.clone();
    let mut last_eig: Vec<f64> = Vec::new();

    for t in 1..=params.max_iter {
        let s_sym = symmetrize(&s);
        let l = laplacian(&s_sym)?;
        let graph = graph_term(&gram, &l);
        let z = if spcan {
            graph.clone()
        } else {
            state.z(params.beta, Some(&(&graph * params.delta)))
        };
        let spectrum = sym_eig(&z)?;
        q = spectrum.trailing(params.k)?;
        align_repeated_eigvecs(&mut q, spectrum.eigenvalues.as_slice(), &state.q, REPEAT_TOL)?;
        if t > 1 {
            let trace = |m: &DMatrix<f64>| (m.transpose() * &z * m).trace();
            let (new, old) = (trace(&q), trace(&state.q));
            if new > old + 1e-9 * old.abs().max(1.0) {
                diagnostics.subproblem_violations += 1;
            }
        }

        last_eig = sym_eigenvalues(&l)?;
        let projected = &gram * &q;
        let objective = {
            let base = if spcan {
                0.0
            } else {
                objective_terms(x, y, &q, params.alpha, params.beta)
            };
            let gammas = row_gammas(&dist, params.m)?;
            let weight = if spcan { 1.0 } else { params.delta };
            base + weight * bracket(&projected, y, &l, &s, &gammas, rank.lambda)
        };
        diagnostics.iterations = t;
        diagnostics.objective.push(objective);

        let step = match params.variant {
            // a frozen graph cannot change its component count
            Variant::FixedGraph => RankStep::Converged,
            _ => rank_adjust(&mut rank, &last_eig)?,
        };
        diagnostics.lambda.push(rank.lambda);
        if step == RankStep::Converged && l11_norm(&(&q - &state.q)) < params.tol {
            diagnostics.converged = true;
            break;
        }

        state.accept(q.clone(), params.eps)?;
        if params.variant != Variant::FixedGraph {
            dist = NeighborDistances::new(
                &pairwise_sq_dists(&projected),
                Some(&label_dist),
                rank.lambda,
            )?;
            let gammas = row_gammas(&dist, params.m)?;
            let before = graph_objective(&dist, &s, &gammas);
            s = similarity_from(&dist, params.m, params.eps)?.into_matrix();
            let after = graph_objective(&dist, &s, &gammas);
            if after > before + 1e-9 * before.abs().max(1.0) {
                diagnostics.subproblem_violations += 1;
            }
        }
    }

    diagnostics.final_lambda = Some(rank.lambda);
    diagnostics.components = Some(laplacian_nullity(&last_eig));
    let graph = SimilarityGraph::new(s, params.m)?;
    Ok((
        ReductionModel {
            w: x.transpose() * &q,
            q: Some(q),
            diagnostics,
        },
        graph,
    ))
}

/// Supervised PCAN: the joint loop with only the graph term in the Q-step.
pub fn fit_spcan(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    params: &SdspcaanParams,
) -> Result<(ReductionModel, SimilarityGraph)> {
    fit_sdspcaan(x, y, &params.clone().with_variant(Variant::SpcanOnly))
}

/// SDSPCA with a fixed locality-preserving graph term.
pub fn fit_sdspca_lpp(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    params: &SdspcaanParams,
) -> Result<(ReductionModel, SimilarityGraph)> {
    fit_sdspcaan(x, y, &params.clone().with_variant(Variant::FixedGraph))
}

/// Tr(XXᵀLXXᵀ) for the Laplacian of the symmetrized initial graph, the
/// normalizer of the δ grid.
pub fn initial_graph_trace(x: &DMatrix<f64>, m: usize, eps: f64) -> Result<f64> {
    let g = initial_graph(x, m, eps)?;
    let l = laplacian(&g.symmetrized())?;
    let gram = x * x.transpose();
    Ok(graph_term(&gram, &l).trace())
}

/// Exposed for diagnostics: γ for one row of combined distances.
pub fn row_gamma(row: &[f64], m: usize) -> Result<f64> {
    let mut sorted: Vec<f64> = row.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    optimal_gamma(&sorted, m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_principal_angle;
    use crate::synth::{make_blobs, BlobSpec};

    fn instance(seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        make_blobs(&BlobSpec::new(8, 3, 4, 6, 3.0, seed))
    }

    #[test]
    fn zero_delta_is_sdspca() {
        let (x, y) = instance(1);
        let p = SdspcaanParams::new(3, 2.0, 1.0, 0.0);
        let (a, _) = fit_sdspcaan(&x, &y, &p).unwrap();
        let b = fit_sdspca(&x, &y, &SdspcaParams::new(3, 2.0, 1.0)).unwrap();
        let angle = max_principal_angle(a.q.as_ref().unwrap(), b.q.as_ref().unwrap()).unwrap();
        assert!(angle <= 1e-6);
    }

    #[test]
    fn fixed_graph_is_untouched() {
        let (x, y) = instance(2);
        let p = SdspcaanParams::new(3, 2.0, 1.0, 1.0).with_variant(Variant::FixedGraph);
        let (_, g) = fit_sdspcaan(&x, &y, &p).unwrap();
        assert_eq!(g, initial_graph(&x, p.m, p.eps).unwrap());
    }

    #[test]
    fn objective_with_zero_delta_matches_sdspca() {
        let (x, y) = instance(3);
        let (model, g) = fit_sdspcaan(&x, &y, &SdspcaanParams::new(3, 1.0, 1.0, 0.5)).unwrap();
        let q = model.q.unwrap();
        let a = sdspcaan_objective(&x, &y, &q, g.matrix(), 1.0, 1.0, 0.0, 1.0, 5).unwrap();
        let b = crate::sdspca::sdspca_objective(&x, &y, &q, 1.0, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iterates_stay_feasible() {
        let (x, y) = instance(4);
        let (model, g) = fit_sdspcaan(&x, &y, &SdspcaanParams::new(4, 1.0, 1.0, 1.0)).unwrap();
        assert!(orthonormality_error(model.q.as_ref().unwrap()) < 1e-10);
        for row in g.matrix().row_iter() {
            assert!((row.sum() - 1.0).abs() < 1e-8);
            assert!(row.iter().all(|v| *v >= 0.0));
        }
        assert_eq!(model.diagnostics.subproblem_violations, 0);
    }

    #[test]
    fn neighbor_count_is_validated() {
        let (x, y) = instance(5);
        let mut p = SdspcaanParams::new(2, 1.0, 1.0, 1.0);
        p.m = x.nrows() - 1;
        assert!(matches!(fit_sdspcaan(&x, &y, &p), Err(Error::Parameter(_))));
    }
}
