//! Adaptive-neighbor similarity learning.
//!
//! Each row of the similarity matrix is the minimizer of
//! `γ_i‖s_i‖² + d_iᵀ s_i` over the probability simplex, where `γ_i` is
//! chosen per row so that exactly `m` neighbors receive mass. The closed
//! form only needs the `m + 1` smallest distances of the row.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Neighbor count used when none is configured.
pub const DEFAULT_NEIGHBORS: usize = 5;

/// Bounds applied to the rank-control weight λ.
pub const LAMBDA_MIN: f64 = 1e-8;
pub const LAMBDA_MAX: f64 = 1e8;

/// Row-stochastic similarity matrix learned from `m` nearest neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGraph {
    s: DMatrix<f64>,
    m: usize,
}

impl SimilarityGraph {
    pub fn new(s: DMatrix<f64>, m: usize) -> Result<Self> {
        if !s.is_square() {
            return Err(Error::Dimension(format!(
                "similarity matrix must be square, got {}x{}",
                s.nrows(),
                s.ncols()
            )));
        }
        Ok(Self { s, m })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.s
    }

    pub fn neighbors(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.s.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.s.nrows() == 0
    }

    /// (S + Sᵀ) / 2.
    pub fn symmetrized(&self) -> DMatrix<f64> {
        symmetrize(&self.s)
    }
}

/// Combined distances `d_ij = d_ij^x + λ·d_ij^f` with the self-distance
/// replaced by +∞ so a sample never selects itself.
#[derive(Debug, Clone)]
pub struct NeighborDistances {
    combined: DMatrix<f64>,
    lambda: f64,
}

impl NeighborDistances {
    pub fn new(dx: &DMatrix<f64>, df: Option<&DMatrix<f64>>, lambda: f64) -> Result<Self> {
        if !dx.is_square() {
            return Err(Error::Dimension(format!(
                "distance matrix must be square, got {}x{}",
                dx.nrows(),
                dx.ncols()
            )));
        }
        let mut combined = dx.clone();
        if let Some(df) = df {
            if df.shape() != dx.shape() {
                return Err(Error::Dimension(format!(
                    "distance matrices differ in shape: {:?} vs {:?}",
                    dx.shape(),
                    df.shape()
                )));
            }
            if lambda != 0.0 {
                combined.zip_apply(df, |a, b| *a += lambda * b);
            }
        }
        for i in 0..combined.nrows() {
            combined[(i, i)] = f64::INFINITY;
        }
        Ok(Self { combined, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.combined.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.combined.nrows() == 0
    }

    /// Row `i`, with `+∞` at position `i`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.combined.row(i).iter().copied().collect()
    }

    /// The full combined matrix (diagonal is +∞).
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.combined
    }
}

/// Indices of the finite entries of `d`, ordered by (distance, index).
fn sorted_candidates(d: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..d.len()).filter(|&j| d[j].is_finite()).collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    idx
}

fn check_neighbors(m: usize, candidates: usize) -> Result<()> {
    if m == 0 || m + 1 > candidates {
        return Err(Error::Parameter(format!(
            "neighbor count {m} needs 1 ≤ m < {candidates} candidates"
        )));
    }
    Ok(())
}

/// Closed-form simplex row with the per-row optimal γ.
///
/// `d` holds one row of distances; non-finite entries (the self sentinel)
/// are excluded and receive zero mass. With distinct distances exactly the
/// `m` nearest candidates are positive. Ties at the `m`/`m+1` boundary give
/// fewer than `m` positive entries; when the `m + 1` nearest are all tied
/// the row falls back to uniform mass on the first `m` of them.
pub fn simplex_row(d: &[f64], m: usize, eps: f64) -> Result<Vec<f64>> {
    let order = sorted_candidates(d);
    check_neighbors(m, order.len())?;
    let boundary = d[order[m]];
    let head: f64 = order[..m].iter().map(|&j| d[j]).sum();
    let denom = m as f64 * boundary - head;

    let mut s = vec![0.0; d.len()];
    if !(denom > 0.0) {
        for &j in &order[..m] {
            s[j] = 1.0 / m as f64;
        }
        return Ok(s);
    }
    let denom = denom + eps;
    for &j in &order[..m] {
        s[j] = ((boundary - d[j]) / denom).max(0.0);
    }
    // eps leaves the row a hair short of unit mass
    let total: f64 = s.iter().sum();
    s.iter_mut().for_each(|v| *v /= total);
    Ok(s)
}

/// γ_i = (m/2)·d_{i,m+1} − (1/2)·Σ_{j≤m} d_ij for ascending distances.
pub fn optimal_gamma(d_sorted: &[f64], m: usize) -> Result<f64> {
    check_neighbors(m, d_sorted.len())?;
    debug_assert!(
        d_sorted.windows(2).all(|w| w[0] <= w[1]),
        "optimal_gamma expects ascending distances"
    );
    let head: f64 = d_sorted[..m].iter().sum();
    Ok(0.5 * m as f64 * d_sorted[m] - 0.5 * head)
}

/// Per-row optimal γ for every row of a combined distance matrix.
pub fn row_gammas(dist: &NeighborDistances, m: usize) -> Result<Vec<f64>> {
    (0..dist.len())
        .map(|i| {
            let row = dist.row(i);
            let sorted: Vec<f64> = sorted_candidates(&row).iter().map(|&j| row[j]).collect();
            optimal_gamma(&sorted, m)
        })
        .collect()
}

/// Recomputes every row of S from combined distances.
pub fn update_similarity(
    dx: &DMatrix<f64>,
    df: Option<&DMatrix<f64>>,
    lambda: f64,
    m: usize,
    eps: f64,
) -> Result<SimilarityGraph> {
    let dist = NeighborDistances::new(dx, df, lambda)?;
    similarity_from(&dist, m, eps)
}

/// Builds S row by row from precombined distances.
pub fn similarity_from(dist: &NeighborDistances, m: usize, eps: f64) -> Result<SimilarityGraph> {
    let n = dist.len();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        let row = simplex_row(&dist.row(i), m, eps)?;
        for (j, v) in row.into_iter().enumerate() {
            s[(i, j)] = v;
        }
    }
    SimilarityGraph::new(s, m)
}

/// Σ_i (d_iᵀ s_i + γ_i ‖s_i‖²), the separable per-row graph objective.
pub fn graph_objective(dist: &NeighborDistances, s: &DMatrix<f64>, gammas: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, gamma) in gammas.iter().enumerate() {
        for j in 0..s.ncols() {
            let v = s[(i, j)];
            if v != 0.0 {
                total += dist.matrix()[(i, j)] * v + gamma * v * v;
            }
        }
    }
    total
}

/// (S + Sᵀ) / 2.
pub fn symmetrize(s: &DMatrix<f64>) -> DMatrix<f64> {
    (s + s.transpose()) * 0.5
}

/// Outcome of one rank-control check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankStep {
    /// Fewer than c components: λ doubled.
    Doubled,
    /// More than c components: λ halved.
    Halved,
    /// Exactly c near-zero eigenvalues.
    Converged,
}

/// λ bookkeeping that steers the Laplacian towards exactly `c` zero
/// eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct RankControlState {
    pub lambda: f64,
    pub tol: f64,
    pub c: usize,
    /// (Σ_{i≤c} e_i, Σ_{i≤c+1} e_i) from the last check.
    pub last_eig_sums: (f64, f64),
}

impl RankControlState {
    pub fn new(c: usize, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
        }
        Ok(Self {
            lambda: 1.0,
            tol,
            c,
            last_eig_sums: (f64::NAN, f64::NAN),
        })
    }
}

/// Doubles λ while the c smallest eigenvalues are not yet near zero, halves
/// it when c+1 of them are, and reports convergence otherwise.
pub fn rank_adjust(state: &mut RankControlState, eig_ascending: &[f64]) -> Result<RankStep> {
    let c = state.c;
    if eig_ascending.len() < c + 1 {
        return Err(Error::Parameter(format!(
            "rank control needs {} eigenvalues, got {}",
            c + 1,
            eig_ascending.len()
        )));
    }
    let head: f64 = eig_ascending[..c].iter().sum();
    let head_plus = head + eig_ascending[c];
    state.last_eig_sums = (head, head_plus);
    let step = if head > state.tol {
        state.lambda *= 2.0;
        RankStep::Doubled
    } else if head_plus < state.tol {
        state.lambda /= 2.0;
        RankStep::Halved
    } else {
        RankStep::Converged
    };
    state.lambda = state.lambda.clamp(LAMBDA_MIN, LAMBDA_MAX);
    Ok(step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::EPS;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn single_neighbor_takes_all_mass() {
        let s = simplex_row(&[0.0, 1.0, 2.0], 1, EPS).unwrap();
        assert_eq!(s, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_neighbors_split_by_distance() {
        // γ = 1.5, η = (3 + 1)/2 = 2, s = (η − d)/(2γ) = [2/3, 1/3, 0]
        let s = simplex_row(&[0.0, 1.0, 2.0], 2, EPS).unwrap();
        assert!(close(&s, &[2.0 / 3.0, 1.0 / 3.0, 0.0], 1e-15));
    }

    #[test]
    fn self_sentinel_is_skipped() {
        let s = simplex_row(&[f64::INFINITY, 3.0, 1.0, 2.0], 2, EPS).unwrap();
        assert_eq!(s[0], 0.0);
        assert!(close(&s, &[0.0, 0.0, 2.0 / 3.0, 1.0 / 3.0], 1e-15));
    }

    #[test]
    fn neighbor_count_is_validated() {
        assert!(matches!(simplex_row(&[0.0, 1.0], 0, EPS), Err(Error::Parameter(_))));
        assert!(matches!(simplex_row(&[0.0, 1.0], 2, EPS), Err(Error::Parameter(_))));
        assert!(matches!(
            simplex_row(&[f64::INFINITY, 1.0, 2.0], 2, EPS),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn boundary_tie_drops_entries() {
        let s = simplex_row(&[0.0, 1.0, 1.0, 4.0], 2, EPS).unwrap();
        assert_eq!(s, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn all_equal_falls_back_to_uniform() {
        let s = simplex_row(&[2.0, 2.0, 2.0, 2.0], 2, EPS).unwrap();
        assert_eq!(s, vec![0.5, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(optimal_gamma(&[0.0, 1.0, 2.0], 2).unwrap(), 1.5);
        assert_eq!(optimal_gamma(&[0.0, 0.0, 0.0], 2).unwrap(), 0.0);
        assert!(optimal_gamma(&[0.0, 1.0], 2).is_err());
    }

    #[test]
    fn far_pairs_pick_their_partner() {
        // points 0,1 at the origin cluster, 2,3 far away
        let pts = DMatrix::from_row_slice(4, 1, &[0.0, 1.0, 100.0, 101.0]);
        let dx = crate::linalg::pairwise_sq_dists(&pts);
        let g = update_similarity(&dx, None, 0.0, 1, EPS).unwrap();
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.],
        );
        assert_eq!(g.matrix(), &expected);
    }

    #[test]
    fn update_matches_rowwise_simplex() {
        let dx = DMatrix::from_row_slice(
            4,
            4,
            &[0., 1., 4., 2., 1., 0., 3., 5., 4., 3., 0., 6., 2., 5., 6., 0.],
        );
        let g = update_similarity(&dx, None, 0.0, 2, EPS).unwrap();
        for i in 0..4 {
            let mut row: Vec<f64> = dx.row(i).iter().copied().collect();
            row[i] = f64::INFINITY;
            let expected = simplex_row(&row, 2, EPS).unwrap();
            assert_eq!(g.matrix().row(i).iter().copied().collect::<Vec<_>>(), expected);
            assert_eq!(g.matrix()[(i, i)], 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let dx = DMatrix::zeros(3, 3);
        let df = DMatrix::zeros(2, 2);
        assert!(matches!(
            update_similarity(&dx, Some(&df), 1.0, 1, EPS),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rank_adjust_branches() {
        let mut st = RankControlState::new(2, 1e-3).unwrap();
        assert_eq!(rank_adjust(&mut st, &[0.0, 0.0, 0.5]).unwrap(), RankStep::Converged);
        assert_eq!(st.lambda, 1.0);
        assert_eq!(rank_adjust(&mut st, &[0.0, 0.2, 0.5]).unwrap(), RankStep::Doubled);
        assert_eq!(st.lambda, 2.0);
        assert_eq!(rank_adjust(&mut st, &[0.0, 0.0, 1e-9]).unwrap(), RankStep::Halved);
        assert_eq!(st.lambda, 1.0);
        assert!(rank_adjust(&mut st, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn lambda_is_clamped() {
        let mut st = RankControlState::new(1, 1e-3).unwrap();
        for _ in 0..100 {
            rank_adjust(&mut st, &[1.0, 1.0]).unwrap();
        }
        assert_eq!(st.lambda, LAMBDA_MAX);
        for _ in 0..200 {
            rank_adjust(&mut st, &[0.0, 0.0]).unwrap();
        }
        assert_eq!(st.lambda, LAMBDA_MIN);
    }

    #[test]
    fn symmetrize_examples() {
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(symmetrize(&s), DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        let t = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(symmetrize(&t), t);
    }
}
