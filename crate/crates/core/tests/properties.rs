use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use tensorrec_core::data::{
    build_dataset, build_time_grid, kcore_filter, split_dataset, Dataset, Interaction, SplitRatios,
    Triple, Vocab,
};
use tensorrec_core::eval::{evaluate_model, ndcg_at_n, recall_at_n, EvalProtocol};
use tensorrec_core::features::{normalize_features, FeatureMatrix, Normalization};
use tensorrec_core::models::{predict_dcf, predict_dcfa, top_n, DcfaParams, Dims, FnScorer};
use tensorrec_core::Matrix;

fn interactions() -> impl Strategy<Value = Vec<Interaction>> {
    prop::collection::vec((0..8u8, 0..10u8, 0..2_000_000i64), 1..60).prop_map(|raw| {
        raw.into_iter()
            .map(|(u, i, ts)| Interaction::new(format!("u{u}"), format!("i{i}"), ts).unwrap())
            .collect()
    })
}

fn dataset(users: usize, items: usize, intervals: usize, triples: &[(usize, usize, usize)]) -> Dataset {
    let users = Arc::new(Vocab::from_ids((0..users).map(|i| format!("u{i}"))).unwrap());
    let items = Arc::new(Vocab::from_ids((0..items).map(|i| format!("i{i}"))).unwrap());
    Dataset::from_triples(users, items, intervals, triples.iter().map(|&(p, q, r)| Triple::new(p, q, r)))
        .unwrap()
}

fn matrix(dim: usize, count: usize, values: &[f64]) -> Matrix {
    Matrix::from_columns(dim, count, values[..dim * count].to_vec())
}

proptest! {
    #[test]
    fn projections_match_brute_force(xs in interactions()) {
        let grid = build_time_grid(&xs, 86_400).unwrap();
        let d = build_dataset(&xs, &grid).unwrap();
        let mut b = BTreeSet::new();
        let mut c = BTreeSet::new();
        for t in d.positives() {
            b.insert((t.user, t.item));
            c.insert((t.interval, t.item));
        }
        prop_assert_eq!(d.positives_user_item().collect::<BTreeSet<_>>(), b.clone());
        prop_assert_eq!(d.positives_interval_item().collect::<BTreeSet<_>>(), c.clone());
        for p in 0..d.num_users() {
            let expect: Vec<usize> = b.iter().filter(|x| x.0 == p).map(|x| x.1).collect();
            prop_assert_eq!(d.user_items(p), expect.as_slice());
        }
        for r in 0..d.num_intervals() {
            let expect: Vec<usize> = c.iter().filter(|x| x.0 == r).map(|x| x.1).collect();
            prop_assert_eq!(d.interval_items(r), expect.as_slice());
        }
    }

    #[test]
    fn kcore_is_idempotent(xs in interactions(), k in 1usize..5) {
        let once = kcore_filter(&xs, k);
        prop_assert_eq!(kcore_filter(&once, k), once);
    }

    #[test]
    fn interval_index_is_monotone(mut ts in prop::collection::vec(0i64..10_000_000, 1..40), width in 1i64..1_000_000) {
        ts.sort_unstable();
        let xs: Vec<_> = ts.iter().map(|&t| Interaction::new("u", "i", t).unwrap()).collect();
        let grid = build_time_grid(&xs, width).unwrap();
        let idx: Vec<usize> = ts.iter().map(|&t| grid.interval_of(t).unwrap()).collect();
        prop_assert!(idx.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(idx[0], 0);
        prop_assert_eq!(*idx.last().unwrap(), grid.num_intervals - 1);
    }

    #[test]
    fn unit_l2_is_idempotent(values in prop::collection::vec(-10.0f64..10.0, 12)) {
        let f = FeatureMatrix::from_matrix(matrix(3, 4, &values)).unwrap();
        let once = normalize_features(&f, Normalization::UnitL2Column);
        let twice = normalize_features(&once, Normalization::UnitL2Column);
        for (a, b) in once.matrix().as_slice().iter().zip(twice.matrix().as_slice()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn dcfa_without_feature_preferences_is_dcf(values in prop::collection::vec(-2.0f64..2.0, 200)) {
        let dims = Dims { users: 5, items: 6, intervals: 4, k1: 3, k2: 2, k_features: 4 };
        let mut params = DcfaParams::zeros(dims);
        params.u = matrix(3, 5, &values[0..]);
        params.v = matrix(3, 6, &values[15..]);
        params.t = matrix(2, 4, &values[33..]);
        params.w = matrix(2, 6, &values[41..]);
        let f = FeatureMatrix::from_matrix(matrix(4, 6, &values[53..])).unwrap();
        for p in 0..5 {
            for q in 0..6 {
                for r in 0..4 {
                    prop_assert_eq!(predict_dcfa(&params, &f, p, q, r).unwrap(), predict_dcf(&params, p, q, r).unwrap());
                }
            }
        }
    }

    #[test]
    fn negating_time_factors_keeps_dcf(values in prop::collection::vec(-2.0f64..2.0, 60)) {
        let dims = Dims { users: 5, items: 6, intervals: 4, k1: 2, k2: 2, k_features: 0 };
        let mut params = DcfaParams::zeros(dims);
        params.u = matrix(2, 5, &values[0..]);
        params.v = matrix(2, 6, &values[10..]);
        params.t = matrix(2, 4, &values[22..]);
        params.w = matrix(2, 6, &values[30..]);
        let mut neg = params.clone();
        neg.t.scale(-1.0);
        neg.w.scale(-1.0);
        for p in 0..5 {
            for q in 0..6 {
                for r in 0..4 {
                    prop_assert_eq!(predict_dcf(&params, p, q, r).unwrap(), predict_dcf(&neg, p, q, r).unwrap());
                }
            }
        }
    }

    #[test]
    fn top_n_ignores_increasing_transforms(
        raw in prop::collection::vec(-64i32..64, 12),
        n in 1usize..12,
        exclude in any::<bool>(),
    ) {
        let scores: Vec<f64> = raw.iter().map(|&x| x as f64 / 8.0).collect();
        let train = dataset(2, 12, 1, &[(0, 3, 0), (0, 7, 0)]);
        let s = FnScorer { num_items: 12, score: |_: usize, q: usize, _: usize| scores[q] };
        let t = FnScorer { num_items: 12, score: |_: usize, q: usize, _: usize| 2.0 * scores[q] + 1.0 };
        prop_assert_eq!(top_n(&s, &train, 0, 0, n, exclude).unwrap(), top_n(&t, &train, 0, 0, n, exclude).unwrap());
    }

    #[test]
    fn recall_is_monotone_in_n(perm in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle(), mask in 1u8..=255) {
        let relevant: Vec<usize> = (0..8).filter(|i| mask & (1 << i) != 0).collect();
        let values: Vec<f64> = (1..=8).map(|n| recall_at_n(&perm, &relevant, n).unwrap()).collect();
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn ndcg_is_one_iff_prefix_relevant(perm in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle(), mask in 1u8..=255, n in 1usize..9) {
        let relevant: Vec<usize> = (0..8).filter(|i| mask & (1 << i) != 0).collect();
        let prefix = n.min(relevant.len());
        let all_relevant = perm[..prefix].iter().all(|q| relevant.contains(q));
        prop_assert_eq!(ndcg_at_n(&perm, &relevant, n).unwrap() == 1.0, all_relevant);
    }

    #[test]
    fn metrics_ignore_relabeling_below_cutoff(
        perm in Just((0..10usize).collect::<Vec<_>>()).prop_shuffle(),
        tail in Just((10..20usize).collect::<Vec<_>>()).prop_shuffle(),
        n in 1usize..10,
    ) {
        // relevant items are 0..3; items ranked after n are irrelevant by construction
        let relevant = [0, 1, 2];
        let mut ranked: Vec<usize> = perm.iter().copied().filter(|q| relevant.contains(q) || *q < 5).collect();
        ranked.truncate(n.min(ranked.len()));
        let mut a = ranked.clone();
        let mut b = ranked.clone();
        a.extend(10..20);
        b.extend(tail);
        prop_assert_eq!(recall_at_n(&a, &relevant, n).unwrap(), recall_at_n(&b, &relevant, n).unwrap());
        prop_assert_eq!(ndcg_at_n(&a, &relevant, n).unwrap(), ndcg_at_n(&b, &relevant, n).unwrap());
    }

    #[test]
    fn evaluation_ignores_increasing_transforms(raw in prop::collection::vec(-64i32..64, 60), seed in 0u64..1000) {
        let mut triples = Vec::new();
        for p in 0..4 {
            for k in 0..6 {
                triples.push((p, (p * 3 + k * 5) % 15, k % 4));
            }
        }
        let d = dataset(4, 15, 4, &triples);
        let split = split_dataset(&d, SplitRatios::default(), seed).unwrap();
        let score = |p: usize, q: usize, r: usize| raw[(p * 15 + q + r) % 60] as f64 / 8.0;
        let s = FnScorer { num_items: 15, score };
        let t = FnScorer { num_items: 15, score: |p: usize, q: usize, r: usize| 2.0 * score(p, q, r) + 1.0 };
        let protocol = EvalProtocol { include_cold: true, ..EvalProtocol::default() };
        let a = evaluate_model(&s, &split.train, &split.test, &[1, 3, 5], &protocol).unwrap();
        let b = evaluate_model(&t, &split.train, &split.test, &[1, 3, 5], &protocol).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn split_partitions_triples() {
    let mut triples = BTreeSet::new();
    let mut k = 0usize;
    while triples.len() < 200 {
        triples.insert((k % 23, (k * 7) % 31, (k * 3) % 5));
        k += 1;
    }
    let triples: Vec<_> = triples.into_iter().collect();
    let d = dataset(23, 31, 5, &triples);
    for seed in 0..100 {
        let split = split_dataset(&d, SplitRatios::default(), seed).unwrap();
        let mut seen = BTreeSet::new();
        let parts = split
            .train
            .positives()
            .iter()
            .copied()
            .chain(split.validation.iter().map(|h| h.triple))
            .chain(split.test.iter().map(|h| h.triple));
        for t in parts {
            assert!(seen.insert((t.user, t.item, t.interval)), "seed {seed}: duplicate {t:?}");
        }
        assert_eq!(seen, triples.iter().copied().collect(), "seed {seed}");
    }
}
