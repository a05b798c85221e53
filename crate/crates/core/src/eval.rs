//! Evaluation protocol: 1-NN with standardized Euclidean distance, balanced
//! accuracy, 20/40/40 random splits and validation-selected hyperparameters.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{center_with, column_means, one_hot, FitDiagnostics, ReductionModel};
use crate::error::{Error, Result};
use crate::graph::DEFAULT_NEIGHBORS;
use crate::linalg::EPS;
use crate::pca::{fit_baseline, fit_pca};
use crate::pcan::{fit_pcan, PcanParams};
use crate::sdspca::{fit_sdspca, SdspcaParams};
use crate::sdspcaan::{fit_sdspcaan, initial_graph_trace, SdspcaanParams, Variant};

/// Sample standard deviation (n − 1) of column `j`; 1 for constant or
/// single-row columns.
pub fn column_std(z: &DMatrix<f64>, j: usize) -> f64 {
    let n = z.nrows();
    if n < 2 {
        return 1.0;
    }
    let col = z.column(j);
    let mean = col.mean();
    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd > 0.0 && sd.is_finite() {
        sd
    } else {
        1.0
    }
}

/// Label of the nearest training row under Σ_j ((a_j − b_j)/σ_j)², with σ
/// from the training scores. Ties go to the lowest training index.
pub fn knn1_predict(
    train_z: &DMatrix<f64>,
    train_labels: &[usize],
    query_z: &DMatrix<f64>,
) -> Result<Vec<usize>> {
    if train_z.nrows() == 0 {
        return Err(Error::Validation("1-NN needs at least one training point".into()));
    }
    if train_labels.len() != train_z.nrows() {
        return Err(Error::Dimension(format!(
            "{} training labels for {} training rows",
            train_labels.len(),
            train_z.nrows()
        )));
    }
    if query_z.ncols() != train_z.ncols() {
        return Err(Error::Dimension(format!(
            "query has {} columns, training scores {}",
            query_z.ncols(),
            train_z.ncols()
        )));
    }
    let inv: Vec<f64> = (0..train_z.ncols())
        .map(|j| 1.0 / column_std(train_z, j))
        .collect();
    let scale = |m: &DMatrix<f64>| {
        let mut out = m.clone();
        for (j, s) in inv.iter().enumerate() {
            out.column_mut(j).scale_mut(*s);
        }
        out
    };
    let (train, query) = (scale(train_z), scale(query_z));
    Ok(query
        .row_iter()
        .map(|q| {
            let mut best = (f64::INFINITY, 0);
            for (i, t) in train.row_iter().enumerate() {
                let d = (t - q).norm_squared();
                if d < best.0 {
                    best = (d, i);
                }
            }
            train_labels[best.1]
        })
        .collect())
}

/// Mean per-class accuracy over the classes present in `actual`.
pub fn bca(predicted: &[usize], actual: &[usize], c: usize) -> Result<f64> {
    if actual.is_empty() {
        return Err(Error::Validation("balanced accuracy of an empty set".into()));
    }
    if predicted.len() != actual.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if let Some(bad) = actual.iter().find(|&&a| a >= c) {
        return Err(Error::Validation(format!("label {bad} out of range for {c} classes")));
    }
    let mut total = vec![0usize; c];
    let mut correct = vec![0usize; c];
    for (p, a) in predicted.iter().zip(actual) {
        total[*a] += 1;
        if p == a {
            correct[*a] += 1;
        }
    }
    let rates: Vec<f64> = total
        .iter()
        .zip(&correct)
        .filter(|(t, _)| **t > 0)
        .map(|(t, k)| *k as f64 / *t as f64)
        .collect();
    Ok(rates.iter().sum::<f64>() / rates.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
    pub repetition: u64,
}

impl SplitSpec {
    pub fn new(seed: u64, repetition: u64) -> Self {
        Self {
            train_fraction: 0.2,
            val_fraction: 0.4,
            test_fraction: 0.4,
            seed,
            repetition,
        }
    }

    /// (train, val, test) sizes: validation and test are rounded, training
    /// takes the remainder.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        let fractions = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fractions.iter().any(|f| !(*f > 0.0))
            || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Parameter(format!(
                "split fractions {fractions:?} must be positive and sum to 1"
            )));
        }
        let val = (self.val_fraction * n as f64).round() as usize;
        let test = (self.test_fraction * n as f64).round() as usize;
        let train = n.saturating_sub(val + test);
        if train == 0 || val == 0 || test == 0 || val + test > n {
            return Err(Error::Validation(format!(
                "{n} samples cannot fill three nonempty splits"
            )));
        }
        Ok((train, val, test))
    }
}

/// Disjoint, sorted index sets covering 0..n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

const SPLIT_ATTEMPTS: usize = 100;

/// Random split, deterministic in (seed, repetition). Redraws up to 100
/// times until the training part holds every class present in `labels`.
pub fn split(n: usize, labels: &[usize], spec: &SplitSpec) -> Result<Split> {
    if labels.len() != n {
        return Err(Error::Dimension(format!("{} labels for {n} samples", labels.len())));
    }
    let (n_train, n_val, _) = spec.sizes(n)?;
    let c = labels.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; c];
    labels.iter().for_each(|&l| present[l] = true);
    let needed = present.iter().filter(|p| **p).count();
    if needed > n_train {
        return Err(Error::Validation(format!(
            "{needed} classes cannot all fit in a training split of {n_train}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(spec.repetition);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..SPLIT_ATTEMPTS {
        order.shuffle(&mut rng);
        let mut seen = vec![false; c];
        order[..n_train].iter().for_each(|&i| seen[labels[i]] = true);
        if seen.iter().filter(|s| **s).count() == needed {
            let sorted = |s: &[usize]| {
                let mut v = s.to_vec();
                v.sort_unstable();
                v
            };
            return Ok(Split {
                train: sorted(&order[..n_train]),
                val: sorted(&order[n_train..n_train + n_val]),
                test: sorted(&order[n_train + n_val..]),
            });
        }
    }
    Err(Error::Validation(format!(
        "no split in {SPLIT_ATTEMPTS} draws put every class in training"
    )))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Baseline,
    Pca,
    Sdspca,
    Pcan,
    Spcan,
    SdspcaLpp,
    Sdspcaan,
}

/// A scaled hyperparameter of some method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    Alpha,
    Beta,
    Delta,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Baseline,
        Method::Pca,
        Method::Sdspca,
        Method::Pcan,
        Method::Spcan,
        Method::SdspcaLpp,
        Method::Sdspcaan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Pca => "pca",
            Method::Sdspca => "sdspca",
            Method::Pcan => "pcan",
            Method::Spcan => "spcan",
            Method::SdspcaLpp => "sdspca_lpp",
            Method::Sdspcaan => "sdspcaan",
        }
    }

    /// The trace-scaled weights this method tunes.
    pub fn weights(self) -> &'static [Weight] {
        match self {
            Method::Baseline | Method::Pca | Method::Pcan | Method::Spcan => &[],
            Method::Sdspca => &[Weight::Alpha, Weight::Beta],
            Method::SdspcaLpp | Method::Sdspcaan => &[Weight::Alpha, Weight::Beta, Weight::Delta],
        }
    }

    pub fn uses(self, w: Weight) -> bool {
        self.weights().contains(&w)
    }

    fn needs_graph_scale(self) -> bool {
        self.uses(Weight::Delta)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Parameter(format!("unknown method {s:?} (expected one of {})", names.join(", ")))
            })
    }
}

impl Weight {
    pub fn name(self) -> &'static str {
        match self {
            Weight::Alpha => "alpha",
            Weight::Beta => "beta",
            Weight::Delta => "delta",
        }
    }
}

impl FromStr for Weight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "alpha" => Ok(Weight::Alpha),
            "beta" => Ok(Weight::Beta),
            "delta" => Ok(Weight::Delta),
            other => Err(Error::Parameter(format!("unknown weight {other:?}"))),
        }
    }
}

pub const DEFAULT_MULTIPLIERS: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];

/// Candidate k values and weight multipliers (applied to the trace scales).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub k: Vec<usize>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            k: (1..=10).map(|i| 10 * i).collect(),
            alpha: DEFAULT_MULTIPLIERS.to_vec(),
            beta: DEFAULT_MULTIPLIERS.to_vec(),
            delta: DEFAULT_MULTIPLIERS.to_vec(),
        }
    }
}

impl Grid {
    pub fn values(&self, w: Weight) -> &[f64] {
        match w {
            Weight::Alpha => &self.alpha,
            Weight::Beta => &self.beta,
            Weight::Delta => &self.delta,
        }
    }

    pub fn values_mut(&mut self, w: Weight) -> &mut Vec<f64> {
        match w {
            Weight::Alpha => &mut self.alpha,
            Weight::Beta => &mut self.beta,
            Weight::Delta => &mut self.delta,
        }
    }

    /// k values with c ≤ k ≤ min(n, d), in grid order.
    pub fn feasible_k(&self, n: usize, d: usize, c: usize) -> Vec<usize> {
        self.k
            .iter()
            .copied()
            .filter(|&k| k >= c && k <= n.min(d) && k > 0)
            .collect()
    }

    /// Grid points for `method` in enumeration order (k outermost, then α,
    /// β, δ). Unused weights are pinned to a multiplier of 1.
    pub fn points(&self, method: Method, n: usize, d: usize, c: usize) -> Result<Vec<GridPoint>> {
        let ks = self.feasible_k(n, d, c);
        if ks.is_empty() {
            return Err(Error::Parameter(format!(
                "no k in {:?} satisfies {c} ≤ k ≤ min({n}, {d})",
                self.k
            )));
        }
        let axis = |w: Weight| -> Result<Vec<f64>> {
            if !method.uses(w) {
                return Ok(vec![1.0]);
            }
            let v = self.values(w);
            if v.is_empty() {
                return Err(Error::Parameter(format!("{} grid is empty", w.name())));
            }
            Ok(v.to_vec())
        };
        let (alphas, betas, deltas) = (axis(Weight::Alpha)?, axis(Weight::Beta)?, axis(Weight::Delta)?);
        let mut out = Vec::with_capacity(ks.len() * alphas.len() * betas.len() * deltas.len());
        for &k in &ks {
            for &alpha in &alphas {
                for &beta in &betas {
                    for &delta in &deltas {
                        out.push(GridPoint { k, alpha, beta, delta });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One hyperparameter setting; weights are multipliers of [`TraceScales`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl GridPoint {
    pub fn multiplier(&self, w: Weight) -> f64 {
        match w {
            Weight::Alpha => self.alpha,
            Weight::Beta => self.beta,
            Weight::Delta => self.delta,
        }
    }

    pub fn set_multiplier(&mut self, w: Weight, v: f64) {
        match w {
            Weight::Alpha => self.alpha = v,
            Weight::Beta => self.beta = v,
            Weight::Delta => self.delta = v,
        }
    }
}

/// Tr(XXᵀ)/Tr(YYᵀ), Tr(XXᵀ)/Tr(D) with D = I, and Tr(XXᵀ)/Tr(XXᵀLXXᵀ)
/// with L from the raw-distance graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceScales {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
}

impl TraceScales {
    pub fn scale(&self, w: Weight) -> f64 {
        match w {
            Weight::Alpha => self.alpha,
            Weight::Beta => self.beta,
            Weight::Delta => self.delta,
        }
    }
}

/// Scales for a centered training split. `with_graph` = false skips the
/// graph trace (δ scale reported as NaN).
pub fn trace_scales(x: &DMatrix<f64>, y: &DMatrix<f64>, m: usize, with_graph: bool) -> Result<TraceScales> {
    let n = x.nrows();
    if n == 0 || y.nrows() != n {
        return Err(Error::Dimension(format!(
            "trace scales need matching nonempty X ({}) and Y ({})",
            n,
            y.nrows()
        )));
    }
    let txx = x.norm_squared();
    let tyy = y.norm_squared();
    if !(tyy > 0.0) {
        return Err(Error::Validation("label matrix is all zero".into()));
    }
    let delta = if with_graph {
        let tg = initial_graph_trace(x, m, EPS)?;
        if !(tg > 0.0) {
            return Err(Error::Numeric(format!(
                "graph trace Tr(XXᵀLXXᵀ) = {tg:e} is not positive"
            )));
        }
        txx / tg
    } else {
        f64::NAN
    };
    Ok(TraceScales {
        alpha: txx / tyy,
        beta: txx / n as f64,
        delta,
    })
}

/// Fits `method` on a centered training fold at a concrete grid point.
pub fn fit_method(
    method: Method,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    point: &GridPoint,
    scales: &TraceScales,
    m: usize,
) -> Result<ReductionModel> {
    let (alpha, beta, delta) = (
        point.alpha * scales.alpha,
        point.beta * scales.beta,
        point.delta * scales.delta,
    );
    let joint = |variant: Variant, delta: f64| -> Result<ReductionModel> {
        let mut p = SdspcaanParams::new(point.k, alpha, beta, delta).with_variant(variant);
        p.m = m;
        Ok(fit_sdspcaan(x, y, &p)?.0)
    };
    match method {
        Method::Baseline => fit_baseline(x.ncols(), point.k),
        Method::Pca => fit_pca(x, point.k),
        Method::Sdspca => fit_sdspca(x, y, &SdspcaParams::new(point.k, alpha, beta)),
        Method::Pcan => {
            let mut p = PcanParams::new(point.k, y.ncols());
            p.m = m;
            Ok(fit_pcan(x, &p)?.0)
        }
        Method::Spcan => joint(Variant::SpcanOnly, 1.0),
        Method::SdspcaLpp => joint(Variant::FixedGraph, delta),
        Method::Sdspcaan => joint(Variant::Full, delta),
    }
}

/// Features and labels of one split, centered with the training mean.
#[derive(Debug, Clone)]
pub struct Fold {
    pub x: DMatrix<f64>,
    pub labels: Vec<usize>,
}

impl Fold {
    fn y(&self, c: usize) -> Result<DMatrix<f64>> {
        one_hot(&self.labels, c)
    }
}

/// A labelled dataset; features need not be centered.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub labels: Vec<usize>,
    pub c: usize,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != x.nrows() {
            return Err(Error::Dimension(format!(
                "{} labels for {} rows",
                labels.len(),
                x.nrows()
            )));
        }
        let c = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Self { x, labels, c })
    }

    /// The three folds of `split`, each centered with the training mean.
    pub fn folds(&self, split: &Split) -> Result<(Fold, Fold, Fold)> {
        let rows = |idx: &[usize]| self.x.select_rows(idx.iter());
        let raw_train = rows(&split.train);
        let means = column_means(&raw_train);
        let fold = |idx: &[usize], x: DMatrix<f64>| -> Result<Fold> {
            Ok(Fold {
                x: center_with(&x, &means)?,
                labels: idx.iter().map(|&i| self.labels[i]).collect(),
            })
        };
        Ok((
            fold(&split.train, raw_train.clone())?,
            fold(&split.val, rows(&split.val))?,
            fold(&split.test, rows(&split.test))?,
        ))
    }
}

/// BCA of 1-NN on `query` after projecting both folds with `model`.
pub fn score(model: &ReductionModel, train: &Fold, query: &Fold, c: usize) -> Result<f64> {
    let zt = model.transform(&train.x)?;
    let zq = model.transform(&query.x)?;
    let predicted = knn1_predict(&zt, &train.labels, &zq)?;
    bca(&predicted, &query.labels, c)
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub point: GridPoint,
    pub val_bca: f64,
    pub model: ReductionModel,
    /// Grid points whose fit failed, with the reason.
    pub failures: Vec<(GridPoint, String)>,
}

/// Fits every grid point on `train` and keeps the best validation BCA.
/// Ties go to the smaller k, then to the earlier grid point.
#[allow(clippy::too_many_arguments)]
pub fn select_hyperparameters(
    method: Method,
    train: &Fold,
    val: &Fold,
    c: usize,
    points: &[GridPoint],
    scales: &TraceScales,
    m: usize,
) -> Result<Selection> {
    if points.is_empty() {
        return Err(Error::Parameter("empty hyperparameter grid".into()));
    }
    let y = train.y(c)?;
    let mut best: Option<(GridPoint, f64, ReductionModel)> = None;
    let mut failures = Vec::new();
    for point in points {
        let outcome = fit_method(method, &train.x, &y, point, scales, m)
            .and_then(|model| Ok((score(&model, train, val, c)?, model)));
        match outcome {
            Ok((v, model)) => {
                let better = match &best {
                    None => true,
                    Some((p, b, _)) => v > *b || (v == *b && point.k < p.k),
                };
                if better {
                    best = Some((*point, v, model));
                }
            }
            Err(e) => failures.push((*point, e.to_string())),
        }
    }
    match best {
        Some((point, val_bca, model)) => Ok(Selection {
            point,
            val_bca,
            model,
            failures,
        }),
        None => {
            let reasons: Vec<String> = failures
                .iter()
                .map(|(p, e)| format!("k={} α×{} β×{} δ×{}: {e}", p.k, p.alpha, p.beta, p.delta))
                .collect();
            Err(Error::Numeric(format!(
                "all {} grid points failed: {}",
                failures.len(),
                reasons.join("; ")
            )))
        }
    }
}

/// Outcome of one repetition of the protocol.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub point: GridPoint,
    pub scales: TraceScales,
    pub val_bca: f64,
    pub test_bca: f64,
    pub diagnostics: FitDiagnostics,
    pub failures: Vec<(GridPoint, String)>,
}

/// Protocol options shared by every repetition.
#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    pub grid: Grid,
    pub m: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Self {
            grid: Grid::default(),
            m: DEFAULT_NEIGHBORS,
        }
    }
}

/// Split, center, select on validation, then score the selected model on
/// the test fold.
pub fn grid_search(
    data: &Dataset,
    method: Method,
    protocol: &Protocol,
    spec: &SplitSpec,
) -> Result<RunResult> {
    let parts = split(data.x.nrows(), &data.labels, spec)?;
    let (train, val, test) = data.folds(&parts)?;
    let y = train.y(data.c)?;
    let scales = trace_scales(&train.x, &y, protocol.m, method.needs_graph_scale())?;
    let points = protocol
        .grid
        .points(method, train.x.nrows(), train.x.ncols(), data.c)?;
    let selection = select_hyperparameters(method, &train, &val, data.c, &points, &scales, protocol.m)?;
    let test_bca = score(&selection.model, &train, &test, data.c)?;
    Ok(RunResult {
        point: selection.point,
        scales,
        val_bca: selection.val_bca,
        test_bca,
        diagnostics: selection.model.diagnostics,
        failures: selection.failures,
    })
}

/// Mean and sample standard deviation of per-run test BCAs.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub bcas: Vec<f64>,
    pub selected: Vec<GridPoint>,
    pub mean: f64,
    pub std: f64,
}

impl BenchReport {
    pub fn from_runs(runs: &[RunResult]) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::Validation("no runs to summarize".into()));
        }
        let bcas: Vec<f64> = runs.iter().map(|r| r.test_bca).collect();
        let (mean, std) = mean_std(&bcas);
        Ok(Self {
            selected: runs.iter().map(|r| r.point).collect(),
            bcas,
            mean,
            std,
        })
    }

    /// Most frequently selected k (smaller k on ties).
    pub fn best_k_mode(&self) -> usize {
        let mut ks: Vec<usize> = self.selected.iter().map(|p| p.k).collect();
        ks.sort_unstable();
        let mut best = (0, 0);
        let mut i = 0;
        while i < ks.len() {
            let j = ks[i..].iter().take_while(|&&k| k == ks[i]).count();
            if j > best.1 {
                best = (ks[i], j);
            }
            i += j;
        }
        best.0
    }
}

/// Mean and n − 1 standard deviation (0 for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `repetitions` independent splits of the protocol.
pub fn repeat(
    data: &Dataset,
    method: Method,
    protocol: &Protocol,
    seed: u64,
    repetitions: usize,
) -> Result<Vec<RunResult>> {
    (0..repetitions)
        .map(|r| grid_search(data, method, protocol, &SplitSpec::new(seed, r as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{make_blobs, BlobSpec};

    #[test]
    fn nearest_neighbor_examples() {
        let train = DMatrix::from_column_slice(2, 1, &[0.0, 10.0]);
        let q = DMatrix::from_column_slice(1, 1, &[1.0]);
        assert_eq!(knn1_predict(&train, &[0, 1], &q).unwrap(), vec![0]);
        assert_eq!(knn1_predict(&train, &[0, 1], &train).unwrap(), vec![0, 1]);
        assert!(knn1_predict(&DMatrix::zeros(0, 1), &[], &q).is_err());
    }

    #[test]
    fn standardization_changes_the_neighbor() {
        // column 1 spans ±100, column 0 spans ±1
        let train = DMatrix::from_row_slice(2, 2, &[1.0, -100.0, -1.0, 100.0]);
        let q = DMatrix::from_row_slice(1, 2, &[1.0, 60.0]);
        // raw: (0, 160²) vs (2², 40²): second row is nearer
        // standardized (σ = √2, 100√2): first 0 + (160/141.4)² = 1.28,
        // second (2/1.414)² + (40/141.4)² = 2.08
        assert_eq!(knn1_predict(&train, &[0, 1], &q).unwrap(), vec![0]);
    }

    #[test]
    fn bca_examples() {
        assert_eq!(bca(&[0, 1, 1], &[0, 1, 1], 2).unwrap(), 1.0);
        assert_eq!(bca(&[0, 1, 1, 1], &[0, 0, 1, 1], 2).unwrap(), 0.75);
        assert_eq!(bca(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap(), 0.5);
        assert!(bca(&[], &[], 2).is_err());
        // class 2 absent
        assert_eq!(bca(&[0, 1], &[0, 1], 3).unwrap(), 1.0);
    }

    #[test]
    fn split_sizes_follow_rounding_rule() {
        let spec = SplitSpec::new(0, 0);
        assert_eq!(spec.sizes(10).unwrap(), (2, 4, 4));
        assert_eq!(spec.sizes(476).unwrap(), (96, 190, 190));
        assert!(spec.sizes(2).is_err());
    }

    #[test]
    fn split_is_deterministic_and_covers_classes() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let a = split(30, &labels, &SplitSpec::new(5, 1)).unwrap();
        assert_eq!(a, split(30, &labels, &SplitSpec::new(5, 1)).unwrap());
        assert_ne!(a, split(30, &labels, &SplitSpec::new(5, 2)).unwrap());
        let mut seen = [false; 3];
        a.train.iter().for_each(|&i| seen[labels[i]] = true);
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn impossible_coverage_is_rejected() {
        // 10 samples, 2 training slots, 3 classes
        let labels: Vec<usize> = (0..10).map(|i| i % 3).collect();
        assert!(matches!(
            split(10, &labels, &SplitSpec::new(0, 0)),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn k_grid_respects_bounds() {
        let g = Grid::default();
        assert_eq!(g.feasible_k(200, 166, 2).len(), 10);
        assert_eq!(g.feasible_k(200, 166, 40), vec![40, 50, 60, 70, 80, 90, 100]);
        assert_eq!(g.feasible_k(35, 166, 2), vec![10, 20, 30]);
        assert_eq!(g.points(Method::Sdspcaan, 200, 166, 2).unwrap().len(), 10 * 125);
        assert_eq!(g.points(Method::Pca, 200, 166, 2).unwrap().len(), 10);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("SDSPCA-LPP".parse::<Method>().unwrap(), Method::SdspcaLpp);
        assert!("lda".parse::<Method>().is_err());
    }

    #[test]
    fn single_point_grid_is_selected() {
        let (x, y) = make_blobs(&BlobSpec::new(10, 2, 2, 3, 6.0, 4));
        let data = Dataset::new(x, crate::data::labels_from_one_hot(&y).unwrap()).unwrap();
        let protocol = Protocol {
            grid: Grid {
                k: vec![2],
                ..Grid::default()
            },
            m: 5,
        };
        let r = grid_search(&data, Method::Pca, &protocol, &SplitSpec::new(1, 0)).unwrap();
        assert_eq!(r.point.k, 2);
        assert!((0.0..=1.0).contains(&r.test_bca));
    }

    #[test]
    fn report_statistics() {
        assert_eq!(mean_std(&[1.0]), (1.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
