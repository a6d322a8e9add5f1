mod common;

use common::*;
use lmn_core::linalg::{rank_estimate, svd};
use lmn_core::seqae::{
    build_data_matrix, fit, Factorization, FitOptions, MemorySize, SequenceBatch,
};
use lmn_core::Matrix;
use proptest::prelude::*;
use rand::Rng;

fn random_batch(seed: u64, n: usize, dim: usize, max_len: usize) -> SequenceBatch {
    let mut rng = rng(seed);
    let seqs = (0..n)
        .map(|_| {
            let l = rng.gen_range(1..=max_len);
            random_matrix(&mut rng, l, dim)
        })
        .collect();
    SequenceBatch::new(seqs).unwrap()
}

fn max_reconstruction_error(batch: &SequenceBatch, p: MemorySize) -> f64 {
    let ae = fit(batch, p).unwrap();
    let mut worst: f64 = 0.0;
    for seq in batch.sequences() {
        let y = ae.encode(seq).unwrap();
        let l = seq.rows();
        let rec = ae.reconstruct(y.row(l - 1), l).unwrap();
        for t in 0..l {
            for (x, r) in seq.row(t).iter().zip(rec.row(l - 1 - t)) {
                worst = worst.max((x - r).abs());
            }
        }
    }
    worst
}

#[test]
fn stacked_rows_for_two_sequences() {
    let batch = SequenceBatch::from_vectors(&[
        vec![vec![1.0, -1.0], vec![0.5, 2.0]],
        vec![vec![3.0, 4.0]],
    ])
    .unwrap();
    let xi = build_data_matrix(&batch);
    assert_eq!(xi.shape(), (3, 4));
    assert_eq!(xi.row(2), &[3.0, 4.0, 0.0, 0.0]);
    assert_eq!(xi.row(1), &[0.5, 2.0, 1.0, -1.0]);
}

#[test]
fn exact_at_full_rank() {
    for seed in 0..10 {
        let batch = random_batch(seed, 5, 4, 12);
        let err = max_reconstruction_error(&batch, MemorySize::Auto { max: None });
        assert!(err < 1e-8, "seed {seed}: {err}");
    }
}

#[test]
fn encoded_state_is_row_of_xi_times_u() {
    let batch = random_batch(42, 4, 3, 7);
    let f = Factorization::new(&batch, MemorySize::Auto { max: None }, &FitOptions::default()).unwrap();
    let ae = f.params(f.rank()).unwrap();
    let projected = build_data_matrix(&batch).matmul(&f.svd().u);
    let mut row = 0;
    for seq in batch.sequences() {
        let y = ae.encode(seq).unwrap();
        for t in 0..seq.rows() {
            for (a, b) in y.row(t).iter().zip(projected.row(row)) {
                assert!((a - b).abs() < 1e-10);
            }
            row += 1;
        }
    }
}

#[test]
fn one_step_optimality() {
    let batch = random_batch(5, 5, 4, 12);
    let xi = build_data_matrix(&batch);
    let oracle = oracle_squared_singular_values(&xi);
    let f = Factorization::new(&batch, MemorySize::Auto { max: None }, &FitOptions::default()).unwrap();
    for p in 1..=f.rank() {
        let u = f.svd().u.leading_columns(p);
        let residual = xi.sub(&xi.matmul(&u).matmul(&u.transpose())).sum_sq();
        let discarded: f64 = oracle[p..].iter().map(|v| v.max(0.0)).sum();
        let scale = discarded.max(1e-12 * xi.sum_sq());
        assert!((residual - discarded).abs() <= 1e-6 * scale, "p={p}");
        assert!((f.svd_error(p) - discarded).abs() <= 1e-6 * scale.max(1e-9 * xi.sum_sq()));
    }
}

#[test]
fn under_capacity_error_is_larger() {
    // Two orthogonal one-step sequences: rank 2.
    let batch = SequenceBatch::from_vectors(&[vec![vec![1.0, 0.0]], vec![vec![0.0, 2.0]]]).unwrap();
    let r1 = fit(&batch, MemorySize::Fixed(1)).unwrap().reconstruction_error(&batch).unwrap();
    let r2 = fit(&batch, MemorySize::Fixed(2)).unwrap().reconstruction_error(&batch).unwrap();
    assert!(r1.total > 0.0);
    assert!((r1.total - 1.0).abs() < 1e-12);
    assert!(r2.total < 1e-24);
    assert!(r1.total > r2.total);
}

#[test]
fn profile_sums_to_total() {
    // Long structured sequence: a slow rotation, fitted under capacity.
    let seq = Matrix::from_fn(60, 2, |t, c| {
        let phase = 0.3 * t as f64;
        if c == 0 { phase.cos() } else { phase.sin() }
    });
    let batch = SequenceBatch::new(vec![seq]).unwrap();
    let ae = fit(&batch, MemorySize::Fixed(6)).unwrap();
    let err = ae.reconstruction_error(&batch).unwrap();
    assert_eq!(err.per_timestep[0].len(), 60);
    let sum: f64 = err.per_timestep[0].iter().sum();
    assert!((sum - err.total).abs() < 1e-9);
    assert!(err.total > 0.0);
}

#[test]
fn error_is_monotone_in_memory_size() {
    for seed in 0..5 {
        let batch = random_batch(100 + seed, 5, 3, 8);
        let f = Factorization::new(&batch, MemorySize::Auto { max: None }, &FitOptions::default()).unwrap();
        let mut prev = f64::INFINITY;
        for p in 1..=f.rank() {
            let total = f.params(p).unwrap().reconstruction_error(&batch).unwrap().total;
            assert!(total <= prev * (1.0 + 1e-9) + 1e-12, "seed {seed} p={p}: {total} > {prev}");
            prev = total;
        }
    }
}

#[test]
fn gram_path_matches_materialized_path() {
    let batch = random_batch(9, 4, 3, 6);
    let dense = Factorization::new(&batch, MemorySize::Auto { max: None }, &FitOptions::default()).unwrap();
    let opts = FitOptions { materialize_budget: 0, ..FitOptions::default() };
    let implicit = Factorization::new(&batch, MemorySize::Auto { max: None }, &opts).unwrap();
    assert_eq!(dense.rank(), implicit.rank());
    assert!((dense.energy() - implicit.energy()).abs() < 1e-10 * dense.energy());
    for (a, b) in dense.svd().s.iter().zip(&implicit.svd().s) {
        assert!((a - b).abs() < 1e-8 * dense.svd().s[0]);
    }
    let ae_dense = dense.params(dense.rank()).unwrap();
    let ae_implicit = implicit.params(implicit.rank()).unwrap();
    let e1 = ae_dense.reconstruction_error(&batch).unwrap().total;
    let e2 = ae_implicit.reconstruction_error(&batch).unwrap().total;
    assert!(e1 < 1e-12 && e2 < 1e-10, "{e1} {e2}");
}

#[test]
fn auto_size_respects_cap() {
    let batch = random_batch(3, 3, 2, 5);
    let ae = fit(&batch, MemorySize::Auto { max: Some(2) }).unwrap();
    assert_eq!(ae.p, 2);
    assert_eq!(ae.encoder.shape(), (2, 2));
    assert_eq!(ae.transition.shape(), (2, 2));
}

#[test]
fn auto_size_is_numerical_rank() {
    let batch = random_batch(8, 3, 2, 5);
    let xi = build_data_matrix(&batch);
    let rank = rank_estimate(&svd(&xi, None, 0.0).unwrap().s, 1e-10);
    assert_eq!(fit(&batch, MemorySize::Auto { max: None }).unwrap().p, rank);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn exactness_and_shapes(seed in any::<u64>(), n in 1usize..=5, dim in 1usize..=4, len in 1usize..=12) {
        let batch = random_batch(seed, n, dim, len);
        let ae = fit(&batch, MemorySize::Auto { max: None }).unwrap();
        prop_assert_eq!(ae.encoder.shape(), (ae.p, dim));
        prop_assert_eq!(ae.transition.shape(), (ae.p, ae.p));
        let err = max_reconstruction_error(&batch, MemorySize::Auto { max: None });
        prop_assert!(err < 1e-8, "max error {}", err);
    }
}
