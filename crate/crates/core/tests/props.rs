//! Property tests for structural invariants.

use distpab_core::matrix::{HomogeneousData, Matrix};
use distpab_core::rng::{stream, Purpose};
use distpab_core::stats::{reverse_zscore, zscore_normalize, PartitionSummary};
use distpab_core::transform::{apply_transform, make_reflection, ReflectionMode};
use distpab_core::wire;
use distpab_core::DataMatrix;
use proptest::prelude::*;

fn finite_value() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6..1e6f64, -10.0..10.0f64]
}

prop_compose! {
    fn matrix_strategy(max_rows: usize, max_cols: usize)
        (rows in 2..max_rows, cols in 2..max_cols)
        (data in prop::collection::vec(finite_value(), rows * cols),
         rows in Just(rows), cols in Just(cols))
        -> Matrix
    {
        Matrix::from_vec(rows, cols, data).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shuffle_preserves_row_label_multiset(m in matrix_strategy(20, 6), seed in any::<u64>()) {
        let labels: Vec<String> = (0..m.rows()).map(|i| format!("l{i}")).collect();
        let data = DataMatrix::new(m, Some(labels)).unwrap();
        let mut shuffled = data.clone();
        shuffled.shuffle_rows(&mut stream(seed, 0, Purpose::Shuffle));

        let pairs = |d: &DataMatrix| {
            let mut v: Vec<(Vec<u64>, String)> = (0..d.rows())
                .map(|i| (
                    d.features().row(i).iter().map(|x| x.to_bits()).collect(),
                    d.labels().unwrap()[i].clone(),
                ))
                .collect();
            v.sort();
            v
        };
        prop_assert_eq!(pairs(&data), pairs(&shuffled));
    }

    #[test]
    fn reflection_squares_to_identity(n in 2usize..9, ax in 1usize..9, single in any::<bool>()) {
        let ax = (ax % n).max(1);
        let mode = if single { ReflectionMode::SingleAxis } else { ReflectionMode::AllButAxis };
        let r = make_reflection(n, ax, mode).unwrap();
        let rr = r.matmul(&r).unwrap();
        prop_assert_eq!(rr, Matrix::identity(n + 1));
    }

    #[test]
    fn reflection_is_isometric_on_points(n in 2usize..6, data in prop::collection::vec(-100.0..100.0f64, 24)) {
        let rows = data.len() / n;
        let d = Matrix::from_vec(rows, n, data[..rows * n].to_vec()).unwrap();
        let h = HomogeneousData::from_records(&d).unwrap();
        let r = make_reflection(n, 1, ReflectionMode::AllButAxis).unwrap();
        let out = apply_transform(&r, &h).unwrap();
        for a in 0..rows {
            for b in (a + 1)..rows {
                let before: f64 = (0..n).map(|j| (d.get(a, j) - d.get(b, j)).powi(2)).sum();
                let after: f64 = (0..n).map(|j| (out.get(j, a) - out.get(j, b)).powi(2)).sum();
                prop_assert!((before.sqrt() - after.sqrt()).abs() <= 1e-9 * before.sqrt().max(1.0));
            }
        }
    }

    #[test]
    fn zscore_roundtrip_is_identity(m in matrix_strategy(20, 6)) {
        // Skip degenerate (constant-column) draws.
        if let Ok((z, mean, std)) = zscore_normalize(&m) {
            let back = reverse_zscore(&z, &std, &mean).unwrap();
            let scale = m.as_slice().iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            prop_assert!(back.max_abs_diff(&m) <= 1e-9 * scale);
        }
    }

    #[test]
    fn summary_wire_roundtrip_is_exact(m in matrix_strategy(16, 6), node in any::<u32>()) {
        let summary = PartitionSummary::from_data(&m).unwrap();
        let msg = wire::encode_summary(node, &summary);
        let bytes = wire::encode(&msg);
        let decoded = wire::decode(&bytes).unwrap();
        prop_assert_eq!(&wire::encode(&decoded), &bytes);
        let (node_back, summary_back) = wire::decode_summary(&decoded.payload).unwrap();
        prop_assert_eq!(node_back, node);
        prop_assert_eq!(summary_back, summary);
    }
}
