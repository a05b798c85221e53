//! Synthetic data and brute-force reference solvers.
//!
//! The oracles here take independent routes to quantities the fitted models
//! compute in closed form: a projected-gradient solver for the simplex QP,
//! union-find component counting, and random feasible points for
//! optimality spot checks. They ship with the library so `fit --verify` can
//! run them on small instances.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{center_with, column_means, one_hot};
use crate::error::{Error, Result};

/// Gaussian class clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobSpec {
    pub n_per_class: usize,
    pub c: usize,
    pub d_informative: usize,
    pub d_noise: usize,
    /// Distance between class means in units of the within-class σ.
    pub separation: f64,
    pub seed: u64,
    /// Standard deviation of the noise features relative to σ.
    pub noise_scale: f64,
    /// Mix all features with a random rotation after sampling.
    pub rotate: bool,
}

impl BlobSpec {
    pub fn new(
        n_per_class: usize,
        c: usize,
        d_informative: usize,
        d_noise: usize,
        separation: f64,
        seed: u64,
    ) -> Self {
        Self {
            n_per_class,
            c,
            d_informative,
            d_noise,
            separation,
            seed,
            noise_scale: 1.0,
            rotate: false,
        }
    }

    /// Noise features with `noise_scale`·σ spread, rotated into the
    /// informative ones so no single feature isolates the signal.
    pub fn anisotropic(mut self, noise_scale: f64) -> Self {
        self.noise_scale = noise_scale;
        self.rotate = true;
        self
    }

    pub fn n(&self) -> usize {
        self.n_per_class * self.c
    }

    pub fn d(&self) -> usize {
        self.d_informative + self.d_noise
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Class centers with pairwise distance `separation` (exact when
/// c ≤ d_informative, otherwise random directions of the same norm).
fn class_centers(spec: &BlobSpec, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let radius = spec.separation / 2f64.sqrt();
    let di = spec.d_informative;
    if spec.c <= di {
        DMatrix::from_fn(spec.c, di, |i, j| if i == j { radius } else { 0.0 })
    } else {
        let mut m = gaussian_matrix(rng, spec.c, di);
        for mut row in m.row_iter_mut() {
            let norm = row.norm().max(f64::MIN_POSITIVE);
            row *= radius / norm;
        }
        m
    }
}

/// Samples class blobs (class `j` occupies rows `j·n_per_class ..`),
/// returning column-centered data and one-hot labels.
pub fn make_blobs(spec: &BlobSpec) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centers = class_centers(spec, &mut rng);
    let (n, d) = (spec.n(), spec.d());
    let mut x = gaussian_matrix(&mut rng, n, d);
    for i in 0..n {
        let class = i / spec.n_per_class.max(1);
        for j in 0..spec.d_informative {
            x[(i, j)] += centers[(class, j)];
        }
        for j in spec.d_informative..d {
            x[(i, j)] *= spec.noise_scale;
        }
    }
    if spec.rotate && d > 0 {
        x = x * random_orthonormal(d, d, &mut rng);
    }
    let labels: Vec<usize> = (0..n).map(|i| i / spec.n_per_class.max(1)).collect();
    let x = center_with(&x, &column_means(&x)).expect("matching widths");
    let y = one_hot(&labels, spec.c).expect("labels below c");
    (x, y)
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// γ‖s‖² + dᵀs.
pub fn simplex_objective(d: &[f64], gamma: f64, s: &[f64]) -> f64 {
    s.iter().zip(d).map(|(x, di)| gamma * x * x + di * x).sum()
}

/// Solves min γ‖s‖² + dᵀs over the probability simplex by projected
/// gradient descent.
///
/// The step 1/(4γ) halves the distance to the optimum every iteration;
/// iteration stops once the Frank–Wolfe duality gap is below 1e-10 (scaled
/// by the problem magnitude) and the iterate has stopped moving.
pub fn qp_simplex_oracle(d: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    if d.is_empty() || d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("distances must be finite and nonempty".into()));
    }
    let n = d.len();
    let scale = d.iter().fold(1.0_f64, |a, v| a.max(v.abs())).max(gamma);
    let step = 1.0 / (4.0 * gamma);
    let mut s = vec![1.0 / n as f64; n];
    for _ in 0..200_000 {
        let grad: Vec<f64> = s.iter().zip(d).map(|(x, di)| 2.0 * gamma * x + di).collect();
        let best = grad.iter().copied().fold(f64::INFINITY, f64::min);
        let gap: f64 = grad.iter().zip(&s).map(|(g, x)| g * x).sum::<f64>() - best;
        let moved: Vec<f64> = s.iter().zip(&grad).map(|(x, g)| x - step * g).collect();
        let next = project_simplex(&moved);
        let change = next
            .iter()
            .zip(&s)
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        s = next;
        if gap <= 1e-10 * scale && change <= 1e-14 {
            return Ok(s);
        }
    }
    Err(Error::Oracle("projected gradient did not reach the gap target".into()))
}

/// Connected components of the graph with edges where S_ij > edge_tol.
pub fn count_components(s: &DMatrix<f64>, edge_tol: f64) -> usize {
    component_labels(s, edge_tol).into_iter().max().map_or(0, |m| m + 1)
}

/// Component id per vertex (ids assigned in order of first appearance).
pub fn component_labels(s: &DMatrix<f64>, edge_tol: f64) -> Vec<usize> {
    let n = s.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in 0..s.ncols().min(n) {
            if i != j && (s[(i, j)] > edge_tol || s[(j, i)] > edge_tol) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut ids = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let root = find(&mut parent, i);
            if ids[root] == usize::MAX {
                ids[root] = next;
                next += 1;
            }
            ids[root]
        })
        .collect()
}

/// Random d×k matrix with orthonormal columns.
pub fn random_orthonormal<R: Rng>(d: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Random d×k W with Wᵀ B W = I (Gram–Schmidt in the B inner product).
pub fn random_metric_orthonormal<R: Rng>(b: &DMatrix<f64>, k: usize, rng: &mut R) -> DMatrix<f64> {
    let d = b.nrows();
    let mut w = DMatrix::zeros(d, k);
    let mut filled = 0;
    while filled < k {
        let mut v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        for _ in 0..2 {
            for j in 0..filled {
                let col = w.column(j).clone_owned();
                let proj = (col.transpose() * b * &v)[0];
                v -= col * proj;
            }
        }
        let norm2 = (v.transpose() * b * &v)[0];
        if norm2 > 1e-12 {
            w.column_mut(filled).copy_from(&(v / norm2.sqrt()));
            filled += 1;
        }
    }
    w
}

/// Uniformly random point of the probability simplex.
pub fn random_simplex_point<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// Symmetric nonnegative graph on `n` vertices split into `blocks` groups
/// (shuffled), with random weighted edges only inside groups.
pub fn random_block_graph<R: Rng>(n: usize, blocks: usize, density: f64, rng: &mut R) -> DMatrix<f64> {
    let mut group: Vec<usize> = (0..n).map(|i| i % blocks.max(1)).collect();
    group.shuffle(rng);
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            if group[i] == group[j] && rng.random::<f64>() < density {
                let w = 0.1 + 0.9 * rng.random::<f64>();
                s[(i, j)] = w;
                s[(j, i)] = w;
            }
        }
    }
    s
}
