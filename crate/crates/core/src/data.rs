//! Data preparation helpers and the fitted-model container.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One-hot n×c label matrix for class indices `< c`.
pub fn one_hot(labels: &[usize], c: usize) -> Result<DMatrix<f64>> {
    if let Some(bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::Validation(format!(
            "label {bad} out of range for {c} classes"
        )));
    }
    Ok(DMatrix::from_fn(labels.len(), c, |i, j| {
        if labels[i] == j {
            1.0
        } else {
            0.0
        }
    }))
}

/// Class index per row of a one-hot matrix.
pub fn labels_from_one_hot(y: &DMatrix<f64>) -> Result<Vec<usize>> {
    y.row_iter()
        .enumerate()
        .map(|(i, row)| {
            let ones: Vec<usize> = (0..row.len()).filter(|&j| row[j] == 1.0).collect();
            let zeros = row.iter().filter(|v| **v == 0.0).count();
            if ones.len() == 1 && zeros + 1 == row.len() {
                Ok(ones[0])
            } else {
                Err(Error::Validation(format!("label row {i} is not one-hot")))
            }
        })
        .collect()
}

/// Checks that `y` is one-hot with every class present.
pub fn validate_labels(y: &DMatrix<f64>, n: usize) -> Result<Vec<usize>> {
    if y.nrows() != n {
        return Err(Error::Dimension(format!(
            "label matrix has {} rows, data has {n}",
            y.nrows()
        )));
    }
    if y.ncols() == 0 {
        return Err(Error::Validation("label matrix has no classes".into()));
    }
    let labels = labels_from_one_hot(y)?;
    let mut seen = vec![false; y.ncols()];
    labels.iter().for_each(|&l| seen[l] = true);
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Validation(format!("class {missing} has no samples")));
    }
    Ok(labels)
}

/// Column means.
pub fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    if x.nrows() == 0 {
        return DVector::zeros(x.ncols());
    }
    x.row_mean().transpose()
}

/// Subtracts `means` from every row.
pub fn center_with(x: &DMatrix<f64>, means: &DVector<f64>) -> Result<DMatrix<f64>> {
    if means.len() != x.ncols() {
        return Err(Error::Dimension(format!(
            "{} means for {} columns",
            means.len(),
            x.ncols()
        )));
    }
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        row -= means.transpose();
    }
    Ok(out)
}

/// Fails unless every column mean is within 1e-8 (relative to the largest
/// entry) of zero.
pub fn check_centered(x: &DMatrix<f64>) -> Result<()> {
    let scale = x.amax().max(1.0);
    let worst = column_means(x).amax();
    if worst > 1e-8 * scale {
        return Err(Error::Contract(format!(
            "data must be mean-centered (largest column mean {worst:.3e})"
        )));
    }
    Ok(())
}

/// Per-fit convergence record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitDiagnostics {
    /// Objective value after each iteration.
    pub objective: Vec<f64>,
    /// λ used after each iteration's rank check (graph methods only).
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_lambda: Option<f64>,
    /// Zero-eigenvalue count of the final Laplacian (graph methods only).
    pub components: Option<usize>,
    /// Iterations whose Q-step or S-step increased its own subproblem
    /// objective beyond rounding slack.
    pub subproblem_violations: usize,
}

/// A learned linear projection.
#[derive(Debug, Clone)]
pub struct ReductionModel {
    /// d×k projection.
    pub w: DMatrix<f64>,
    /// n×k auxiliary factor, for methods that learn one.
    pub q: Option<DMatrix<f64>>,
    pub diagnostics: FitDiagnostics,
}

impl ReductionModel {
    pub fn new(w: DMatrix<f64>) -> Self {
        Self {
            w,
            q: None,
            diagnostics: FitDiagnostics::default(),
        }
    }

    pub fn k(&self) -> usize {
        self.w.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.w.nrows()
    }

    /// Projects rows of `x` (already centered with the training mean).
    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.w.nrows() {
            return Err(Error::Dimension(format!(
                "model expects {} features, got {}",
                self.w.nrows(),
                x.ncols()
            )));
        }
        Ok(x * &self.w)
    }
}
