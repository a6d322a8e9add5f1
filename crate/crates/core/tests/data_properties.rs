mod common;

use lmn_core::data::{
    frame_accuracy, frame_accuracy_many, from_frames, make_synthetic, to_frames, SyntheticKind, SyntheticSizes, THRESHOLD,
};
use lmn_core::linalg::{rank_estimate, svd, DEFAULT_RANK_TOL};
use lmn_core::seqae::build_data_matrix;
use lmn_core::Matrix;
use proptest::prelude::*;

fn binary_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(prop::bool::ANY, rows * cols)
        .prop_map(move |bits| Matrix::new(rows, cols, bits.into_iter().map(|b| f64::from(u8::from(b))).collect()).unwrap())
}

fn pairs() -> impl Strategy<Value = Vec<(Matrix, Matrix)>> {
    prop::collection::vec((1usize..6, 1usize..6), 1..5).prop_flat_map(|shapes| {
        shapes
            .into_iter()
            .map(|(r, c)| (binary_matrix(r, c), binary_matrix(r, c)))
            .collect::<Vec<_>>()
    })
}

#[test]
fn low_rank_generator_has_prescribed_rank() {
    for rank in 1..=5 {
        let sizes = SyntheticSizes { train: 6, valid: 2, test: 2, length: 0, dim: 4, density_percent: 50 };
        let splits = make_synthetic(SyntheticKind::LowRank { rank }, sizes, rank as u64).unwrap();
        let xi = build_data_matrix(&splits.train_batch().unwrap());
        let s = svd(&xi, None, 0.0).unwrap().s;
        assert_eq!(rank_estimate(&s, DEFAULT_RANK_TOL), rank);
    }
}

proptest! {
    #[test]
    fn frame_encoding_round_trips(seq in prop::collection::vec(prop::collection::btree_set(21i64..=108, 0..6), 1..8)) {
        let frames: Vec<Vec<i64>> = seq.into_iter().map(|s| s.into_iter().collect()).collect();
        prop_assert_eq!(from_frames(&to_frames(&frames).unwrap()), frames);
    }

    #[test]
    fn accuracy_ignores_sequence_order(mut p in pairs()) {
        let forward = frame_accuracy_many(p.iter().map(|(y, t)| (y, t)), THRESHOLD).unwrap();
        p.reverse();
        let backward = frame_accuracy_many(p.iter().map(|(y, t)| (y, t)), THRESHOLD).unwrap();
        prop_assert_eq!(forward, backward);
        prop_assert!((0.0..=1.0).contains(&forward));
    }

    #[test]
    fn correcting_a_note_never_hurts((y, t) in (1usize..5, 1usize..8).prop_flat_map(|(r, c)| (binary_matrix(r, c), binary_matrix(r, c)))) {
        let mut y = y;
        let mut acc = frame_accuracy(&y, &t, THRESHOLD).unwrap();
        for i in 0..y.len() {
            y.data_mut()[i] = t.data()[i];
            let next = frame_accuracy(&y, &t, THRESHOLD).unwrap();
            prop_assert!(next >= acc);
            acc = next;
        }
        prop_assert_eq!(acc, 1.0);
    }

    /// Global sums and the mean of per-frame ratios agree when every frame
    /// has the same denominator.
    #[test]
    fn equal_denominators_make_formulations_agree(hits in prop::collection::vec(0usize..=3, 1..6)) {
        // Each frame: 3 target notes, `h` of them predicted, nothing else.
        let rows = hits.len();
        let t = Matrix::from_fn(rows, 4, |_, c| if c < 3 { 1.0 } else { 0.0 });
        let y = Matrix::from_fn(rows, 4, |r, c| if c < hits[r] { 1.0 } else { 0.0 });
        let global = frame_accuracy(&y, &t, THRESHOLD).unwrap();
        let mean = hits.iter().map(|&h| h as f64 / 3.0).sum::<f64>() / rows as f64;
        prop_assert!((global - mean).abs() < 1e-15);
    }
}
