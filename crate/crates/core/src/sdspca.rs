//! Supervised discriminative sparse PCA.
//!
//! Minimizes ‖X − QQᵀX‖² + α‖Y − QQᵀY‖² + β‖Q‖_{2,1} over orthonormal Q by
//! iterating Q ← trailing eigenvectors of Z = −XXᵀ − αYYᵀ + βD, where D is
//! the L2,1 reweighting diagonal of the previous Q. Each iteration is a
//! majorize-minimize step, so the objective never increases. The
//! projection is W = XᵀQ; the label loadings are G = YᵀQ.

use nalgebra::{DMatrix, DVector};

use crate::data::{check_centered, validate_labels, FitDiagnostics, ReductionModel};
use crate::error::{Error, Result};
use crate::linalg::{l11_norm, l21_norm, orthonormality_error, reweight_diag, trailing_eigvecs, EPS};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct SdspcaParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub eps: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SdspcaParams {
    pub fn new(k: usize, alpha: f64, beta: f64) -> Self {
        Self {
            k,
            alpha,
            beta,
            eps: EPS,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub(crate) fn validate(&self, n: usize, d: usize) -> Result<()> {
        if self.k == 0 || self.k > n.min(d) {
            return Err(Error::Parameter(format!(
                "subspace dimension {} outside [1, {}]",
                self.k,
                n.min(d)
            )));
        }
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return Err(Error::Parameter(format!(
                "weights must be nonnegative (alpha = {}, beta = {})",
                self.alpha, self.beta
            )));
        }
        if !(self.eps > 0.0) || !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Parameter(
                "eps and tol must be positive and max_iter at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Working state of the alternating solver.
#[derive(Debug, Clone)]
pub struct SdspcaState {
    /// Current n×k factor (zero before the first step).
    pub q: DMatrix<f64>,
    /// Diagonal of the reweighting matrix D.
    pub d: DVector<f64>,
    /// Cached −XXᵀ − αYYᵀ.
    pub z0: DMatrix<f64>,
}

impl SdspcaState {
    /// Z0 = −XXᵀ − αYYᵀ, D = I, Q = 0.
    pub fn new(x: &DMatrix<f64>, y: &DMatrix<f64>, alpha: f64, k: usize) -> Self {
        let n = x.nrows();
        let z0 = -(x * x.transpose()) - (y * y.transpose()) * alpha;
        Self {
            q: DMatrix::zeros(n, k),
            d: DVector::from_element(n, 1.0),
            z0,
        }
    }

    /// Z = Z0 + βD (+ `extra`).
    pub fn z(&self, beta: f64, extra: Option<&DMatrix<f64>>) -> DMatrix<f64> {
        let mut z = match extra {
            Some(e) => &self.z0 + e,
            None => self.z0.clone(),
        };
        if beta != 0.0 {
            for (i, v) in self.d.iter().enumerate() {
                z[(i, i)] += beta * v;
            }
        }
        z
    }

    /// Minimizer of Tr(QᵀZQ) for the current D.
    pub fn solve(&self, beta: f64, extra: Option<&DMatrix<f64>>) -> Result<DMatrix<f64>> {
        trailing_eigvecs(&self.z(beta, extra), self.q.ncols())
    }

    /// Accepts `q` as the new iterate and refreshes D from it.
    pub fn accept(&mut self, q: DMatrix<f64>, eps: f64) -> Result<()> {
        self.d = reweight_diag(&q, eps)?;
        self.q = q;
        Ok(())
    }
}

pub(crate) fn objective_terms(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    q: &DMatrix<f64>,
    alpha: f64,
    beta: f64,
) -> f64 {
    let data = (x - q * (q.transpose() * x)).norm_squared();
    let label = if alpha != 0.0 {
        alpha * (y - q * (q.transpose() * y)).norm_squared()
    } else {
        0.0
    };
    data + label + beta * l21_norm(q)
}

/// ‖X − QQᵀX‖_F² + α‖Y − QQᵀY‖_F² + β‖Q‖_{2,1} for orthonormal Q.
pub fn sdspca_objective(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    q: &DMatrix<f64>,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    if q.nrows() != x.nrows() || y.nrows() != x.nrows() {
        return Err(Error::Dimension(format!(
            "X has {} rows, Y {}, Q {}",
            x.nrows(),
            y.nrows(),
            q.nrows()
        )));
    }
    let err = orthonormality_error(q);
    if !(err <= 1e-6) {
        return Err(Error::Contract(format!(
            "Q must have orthonormal columns (‖QᵀQ − I‖_max = {err:.3e})"
        )));
    }
    Ok(objective_terms(x, y, q, alpha, beta))
}

/// Fits the supervised sparse model; the returned model carries Q and the
/// objective after every iteration.
pub fn fit_sdspca(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    params: &SdspcaParams,
) -> Result<ReductionModel> {
    let (n, d) = x.shape();
    check_centered(x)?;
    validate_labels(y, n)?;
    params.validate(n, d)?;

    let mut state = SdspcaState::new(x, y, params.alpha, params.k);
    let mut diagnostics = FitDiagnostics::default();
    let mut q = state.q.clone();
    for t in 1..=params.max_iter {
        q = state.solve(params.beta, None)?;
        diagnostics.iterations = t;
        diagnostics
            .objective
            .push(objective_terms(x, y, &q, params.alpha, params.beta));
        if l11_norm(&(&q - &state.q)) < params.tol {
            diagnostics.converged = true;
            break;
        }
        state.accept(q.clone(), params.eps)?;
    }
    Ok(ReductionModel {
        w: x.transpose() * &q,
        q: Some(q),
        diagnostics,
    })
}

/// G = YᵀQ, the label loadings at the optimum.
pub fn label_loadings(y: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    y.transpose() * q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::one_hot;
    use crate::linalg::max_principal_angle;
    use crate::pca::fit_vpca;
    use crate::synth::{make_blobs, BlobSpec};

    fn instance(seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let spec = BlobSpec::new(10, 3, 4, 6, 2.0, seed);
        make_blobs(&spec)
    }

    #[test]
    fn no_weights_recovers_vpca() {
        let (x, y) = instance(1);
        let model = fit_sdspca(&x, &y, &SdspcaParams::new(4, 0.0, 0.0)).unwrap();
        let v = fit_vpca(&x, 4).unwrap();
        let angle = max_principal_angle(model.q.as_ref().unwrap(), v.q.as_ref().unwrap()).unwrap();
        assert!(angle <= 1e-6, "angle {angle}");
        assert!(model.diagnostics.converged);
    }

    #[test]
    fn objective_rejects_non_orthonormal_q() {
        let (x, y) = instance(2);
        let q = DMatrix::zeros(x.nrows(), 2);
        assert!(matches!(
            sdspca_objective(&x, &y, &q, 1.0, 1.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn sparsity_term_alone() {
        let x = DMatrix::zeros(4, 3);
        let y = one_hot(&[0, 1, 0, 1], 2).unwrap();
        let q = DMatrix::identity(4, 2);
        assert_eq!(sdspca_objective(&x, &y, &q, 0.0, 2.5).unwrap(), 2.5 * 2.0);
    }

    #[test]
    fn orthonormal_every_iteration() {
        let (x, y) = instance(3);
        let params = SdspcaParams::new(3, 5.0, 3.0);
        let mut state = SdspcaState::new(&x, &y, params.alpha, params.k);
        for _ in 0..10 {
            let q = state.solve(params.beta, None).unwrap();
            assert!(orthonormality_error(&q) < 1e-10);
            state.accept(q, params.eps).unwrap();
            assert!(state.d.iter().all(|v| *v > 0.0 && v.is_finite()));
        }
    }

    #[test]
    fn missing_class_is_a_validation_error() {
        let (x, _) = instance(4);
        let labels: Vec<usize> = (0..x.nrows()).map(|i| i % 2).collect();
        let y = one_hot(&labels, 3).unwrap();
        assert!(matches!(
            fit_sdspca(&x, &y, &SdspcaParams::new(2, 1.0, 1.0)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn max_iter_reached_is_flagged() {
        let (x, y) = instance(5);
        let mut params = SdspcaParams::new(3, 1.0, 50.0);
        params.max_iter = 1;
        let model = fit_sdspca(&x, &y, &params).unwrap();
        assert!(!model.diagnostics.converged);
        assert_eq!(model.diagnostics.iterations, 1);
    }
}
