use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subspace_core::data::{labels_from_one_hot, one_hot};
use subspace_core::eval::{knn1_predict, bca, split, trace_scales, Dataset, SplitSpec};
use subspace_core::graph::{row_gammas, symmetrize, NeighborDistances};
use subspace_core::linalg::{l21_norm, laplacian, max_principal_angle, pairwise_sq_dists};
use subspace_core::pcan::{default_ridge, generalized_trailing_step};
use subspace_core::sdspcaan::{fit_sdspcaan, fit_spcan, sdspcaan_objective, SdspcaanParams};
use subspace_core::synth::{count_components, make_blobs, random_metric_orthonormal, random_orthonormal, BlobSpec};

fn blobs(per_class: usize, c: usize, di: usize, dn: usize, sep: f64, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    make_blobs(&BlobSpec::new(per_class, c, di, dn, sep, seed))
}

#[test]
fn objective_matches_term_by_term_evaluation() {
    let (x, y) = blobs(6, 3, 3, 3, 2.0, 11);
    let n = x.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let q = random_orthonormal(n, 4, &mut rng);
    // random row-stochastic S with zero diagonal
    let mut s = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random::<f64>() });
    for mut row in s.row_iter_mut() {
        let t = row.sum();
        row /= t;
    }
    let (alpha, beta, delta, lambda, m) = (0.7, 1.3, 0.4, 2.5, 4);

    let recon = (&x - &q * q.transpose() * &x).norm_squared();
    let label = alpha * (&y - &q * q.transpose() * &y).norm_squared();
    let sparse = beta * l21_norm(&q);
    let l = laplacian(&symmetrize(&s)).unwrap();
    let p = &x * x.transpose() * &q;
    let dx = pairwise_sq_dists(&p);
    let dy = pairwise_sq_dists(&y);
    let gammas = row_gammas(&NeighborDistances::new(&dx, Some(&dy), lambda).unwrap(), m).unwrap();
    let reg: f64 = (0..n).map(|i| gammas[i] * s.row(i).norm_squared()).sum();
    let bracket = 2.0 * (p.transpose() * &l * &p).trace() + reg + 2.0 * lambda * (y.transpose() * &l * &y).trace();
    let expected = recon + label + sparse + 0.5 * delta * bracket;

    let got = sdspcaan_objective(&x, &y, &q, &s, alpha, beta, delta, lambda, m).unwrap();
    assert!((got - expected).abs() <= 1e-9 * expected.abs(), "{got} vs {expected}");
}

#[test]
fn label_term_vanishes_on_class_blocks() {
    let labels = [0, 0, 0, 1, 1, 2, 2];
    let y = one_hot(&labels, 3).unwrap();
    let s = DMatrix::from_fn(7, 7, |i, j| if i != j && labels[i] == labels[j] { 1.0 } else { 0.0 });
    let l = laplacian(&s).unwrap();
    assert!((y.transpose() * l * &y).trace().abs() < 1e-12);
}

#[test]
fn spcan_finds_label_aligned_clusters() {
    // wide data so XXᵀ has full rank and the graph term is informative
    let (x, y) = blobs(8, 3, 30, 30, 8.0, 21);
    let (model, graph) = fit_spcan(&x, &y, &SdspcaanParams::new(5, 1.0, 1.0, 1.0)).unwrap();
    assert!(model.diagnostics.converged);
    assert_eq!(count_components(&graph.symmetrized(), 0.0), 3);
}

#[test]
fn huge_delta_approaches_spcan() {
    let (x, y) = blobs(8, 3, 30, 30, 8.0, 22);
    let scales = trace_scales(&x, &y, 5, true).unwrap();
    let mut full = SdspcaanParams::new(5, scales.alpha, scales.beta, 1e9 * scales.delta);
    full.max_iter = 100;
    let (a, _) = fit_sdspcaan(&x, &y, &full).unwrap();
    let (b, _) = fit_spcan(&x, &y, &full).unwrap();
    let angle = max_principal_angle(a.q.as_ref().unwrap(), b.q.as_ref().unwrap()).unwrap();
    assert!(angle <= 1e-3, "angle {angle}");
}

#[test]
fn separated_blobs_classify_well_after_reduction() {
    let (x, y) = blobs(40, 3, 10, 40, 6.0, 31);
    let labels = labels_from_one_hot(&y).unwrap();
    let data = Dataset::new(x, labels.clone()).unwrap();
    // held-out 40%
    let mut spec = SplitSpec::new(3, 0);
    spec.train_fraction = 0.5;
    spec.val_fraction = 0.1;
    let parts = split(data.x.nrows(), &labels, &spec).unwrap();
    let (train, _, test) = data.folds(&parts).unwrap();
    let yt = one_hot(&train.labels, 3).unwrap();
    let scales = trace_scales(&train.x, &yt, 5, true).unwrap();
    let p = SdspcaanParams::new(10, scales.alpha, scales.beta, scales.delta);
    let (model, _) = fit_sdspcaan(&train.x, &yt, &p).unwrap();
    let zt = model.transform(&train.x).unwrap();
    let zq = model.transform(&test.x).unwrap();
    let pred = knn1_predict(&zt, &train.labels, &zq).unwrap();
    let score = bca(&pred, &test.labels, 3).unwrap();
    assert!(score >= 0.95, "BCA {score}");
}

#[test]
fn generalized_step_beats_random_feasible_points() {
    let (x, _) = blobs(10, 2, 3, 3, 4.0, 41);
    let n = x.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let s = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { rng.random::<f64>() });
    let l = laplacian(&symmetrize(&s)).unwrap();
    let ridge = default_ridge(&x);
    let w = generalized_trailing_step(&x, &l, 2, ridge).unwrap();
    let a = x.transpose() * &l * &x;
    let mut b = x.transpose() * &x;
    for i in 0..b.nrows() {
        b[(i, i)] += ridge;
    }
    let best = (w.transpose() * &a * &w).trace();
    for _ in 0..200 {
        let r = random_metric_orthonormal(&b, 2, &mut rng);
        assert!(best <= (r.transpose() * &a * &r).trace() + 1e-8);
    }
}

#[test]
fn blobs_without_separation_are_near_chance() {
    let (x, y) = blobs(60, 3, 4, 0, 0.0, 51);
    let labels = labels_from_one_hot(&y).unwrap();
    let parts = split(x.nrows(), &labels, &SplitSpec::new(1, 0)).unwrap();
    let data = Dataset::new(x, labels).unwrap();
    let (train, _, test) = data.folds(&parts).unwrap();
    let pred = knn1_predict(&train.x, &train.labels, &test.x).unwrap();
    let score = bca(&pred, &test.labels, 3).unwrap();
    assert!((score - 1.0 / 3.0).abs() <= 0.1, "BCA {score}");
}

#[test]
fn wide_separation_is_nearly_perfect_on_raw_data() {
    let (x, y) = blobs(50, 2, 3, 2, 10.0, 61);
    let labels = labels_from_one_hot(&y).unwrap();
    let parts = split(x.nrows(), &labels, &SplitSpec::new(2, 0)).unwrap();
    let data = Dataset::new(x, labels).unwrap();
    let (train, _, test) = data.folds(&parts).unwrap();
    let pred = knn1_predict(&train.x, &train.labels, &test.x).unwrap();
    assert!(bca(&pred, &test.labels, 2).unwrap() >= 0.99);
}
