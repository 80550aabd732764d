use std::collections::BTreeSet;

use groupim::baselines::{score_aggregate, AggregationStrategy, StrategyKind};
use groupim::data::{construct_groups, split_groups, Checkin, CheckinLog, SocialGraph};
use groupim::evaluation::{binary_pearson, group_coherence, ndcg_at_k, recall_at_k, RankedList};
use groupim::model::{aggregate, init_params, ModelDims};
use groupim::training::TrainConfig;
use groupim::{AggregatorKind, GroupRecord, InteractionMatrix};
use ndarray::{Array1, ArrayView1};
use proptest::prelude::*;

fn scores_and_relevant() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    (2usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::btree_set(0..n, 1..=n).prop_map(|s| s.into_iter().collect()),
        )
    })
}

fn member_vectors() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
    (2usize..7).prop_flat_map(|n| {
        (
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 6), n),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
        )
    })
}

fn score_rows() -> impl Strategy<Value = Vec<Array1<f64>>> {
    (1usize..6, 1usize..12).prop_flat_map(|(m, n)| {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, n).prop_map(Array1::from), m)
    })
}

fn views(v: &[Vec<f64>]) -> Vec<ArrayView1<'_, f64>> {
    v.iter().map(|x| ArrayView1::from(x.as_slice())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn metrics_are_bounded_and_monotone((scores, relevant) in scores_and_relevant()) {
        let ranked = RankedList::from_scores(&scores);
        let mut prev = 0.0;
        for k in 1..=scores.len() {
            let r = recall_at_k(&ranked, &relevant, k).unwrap();
            let n = ndcg_at_k(&ranked, &relevant, k).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&n));
            let hits = ranked.top(k).iter().filter(|i| relevant.contains(i)).count();
            prop_assert!(hits as f64 >= prev);
            prev = hits as f64;
        }
        let all = scores.len();
        prop_assert_eq!(recall_at_k(&ranked, &relevant, all).unwrap(), 1.0);
    }

    #[test]
    fn perfect_ranking_scores_one((scores, relevant) in scores_and_relevant()) {
        let mut boosted = scores.clone();
        for &i in &relevant {
            boosted[i] += 100.0;
        }
        let ranked = RankedList::from_scores(&boosted);
        for k in [1, 5, 20] {
            prop_assert!((ndcg_at_k(&ranked, &relevant, k).unwrap() - 1.0).abs() < 1e-12);
            prop_assert_eq!(recall_at_k(&ranked, &relevant, k).unwrap(), 1.0);
        }
    }

    #[test]
    fn aggregators_ignore_member_order((members, perm) in member_vectors(), seed in 0u64..50) {
        let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| members[i].clone()).collect();
        for kind in AggregatorKind::ALL {
            let dims = ModelDims { num_items: 3, embed_dim: 6, aggregator: kind };
            let model = init_params(dims, TrainConfig { embed_dim: 6, ..TrainConfig::default() }.hyper(), seed).unwrap();
            let a = aggregate(&model.aggregator, &views(&members)).unwrap();
            let b = aggregate(&model.aggregator, &views(&shuffled)).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn score_strategies_are_ordered(rows in score_rows()) {
        let agg = |k| score_aggregate(&rows, AggregationStrategy::new(k)).unwrap();
        let (lm, avg, max) = (agg(StrategyKind::Lm), agg(StrategyKind::Avg), agg(StrategyKind::Max));
        for i in 0..avg.len() {
            prop_assert!(lm[i] <= avg[i] + 1e-12);
            prop_assert!(avg[i] <= max[i] + 1e-12);
        }
        let rd = score_aggregate(&rows, AggregationStrategy::rd(1.0, 0.0).unwrap()).unwrap();
        prop_assert_eq!(&rd, &avg);
        let rd_penalized = score_aggregate(&rows, AggregationStrategy::rd(1.0, 1.0).unwrap()).unwrap();
        for i in 0..avg.len() {
            prop_assert!(rd_penalized[i] <= avg[i]);
        }
    }

    #[test]
    fn average_is_linear(rows in score_rows(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let avg = score_aggregate(&rows, AggregationStrategy::new(StrategyKind::Avg)).unwrap();
        let moved: Vec<Array1<f64>> = rows.iter().map(|r| r * a + b).collect();
        let avg_moved = score_aggregate(&moved, AggregationStrategy::new(StrategyKind::Avg)).unwrap();
        for (x, y) in avg.iter().zip(&avg_moved) {
            prop_assert!((a * x + b - y).abs() < 1e-9);
        }
    }

    #[test]
    fn split_partitions_member_sets(
        raw in prop::collection::vec((prop::collection::btree_set(0usize..12, 2..5), 0usize..8), 10..60),
        seed in 0u64..1000,
    ) {
        let groups: Vec<GroupRecord> = raw
            .iter()
            .enumerate()
            .map(|(i, (m, item))| GroupRecord::new(i as u64, m.iter().copied().collect(), vec![*item]))
            .collect();
        let users = InteractionMatrix::from_rows(8, vec![vec![0]; 12]).unwrap();
        let distinct: BTreeSet<&Vec<usize>> = groups.iter().map(|g| &g.members).collect();
        prop_assume!(distinct.len() >= 3);
        let split = split_groups(&groups, &users, [0.7, 0.1, 0.2], seed).unwrap();
        prop_assert_eq!(split.train.len() + split.val.len() + split.test.len(), groups.len());
        let sets = |p: &[GroupRecord]| p.iter().map(|g| g.members.clone()).collect::<BTreeSet<_>>();
        let (tr, va, te) = (sets(&split.train), sets(&split.val), sets(&split.test));
        prop_assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
        let again = split_groups(&groups, &users, [0.7, 0.1, 0.2], seed).unwrap();
        prop_assert_eq!(split.test, again.test);
    }

    #[test]
    fn coherence_is_symmetric(
        rows in prop::collection::vec(prop::collection::btree_set(0usize..15, 0..10), 3..6),
    ) {
        let rows: Vec<Vec<usize>> = rows.into_iter().map(|s| s.into_iter().collect()).collect();
        for a in &rows {
            for b in &rows {
                let (x, y) = (binary_pearson(a, b, 15), binary_pearson(b, a, 15));
                prop_assert_eq!(x, y);
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&x));
            }
        }
        let n = rows.len();
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                pairs.push(binary_pearson(&rows[a], &rows[b], 15));
            }
        }
        let expected = pairs.iter().sum::<f64>() / pairs.len() as f64;
        let users = InteractionMatrix::from_rows(15, rows).unwrap();
        let coherence = group_coherence(&GroupRecord::new(0, (0..n).collect(), vec![0]), &users).unwrap();
        prop_assert!((coherence - expected).abs() < 1e-12);
    }

    #[test]
    fn group_construction_conserves_checkins(
        records in prop::collection::vec((0usize..8, 0usize..5, 0u64..5000), 1..80),
        edges in prop::collection::vec((0usize..8, 0usize..8), 0..20),
        window in 1u64..2000,
    ) {
        let log = CheckinLog::new(
            8,
            5,
            records.iter().map(|&(user, poi, timestamp)| Checkin { user, poi, timestamp }).collect(),
        ).unwrap();
        let graph = SocialGraph::from_edges(8, edges.into_iter().filter(|(a, b)| a != b)).unwrap();
        let built = construct_groups(&log, &graph, window).unwrap();
        prop_assert_eq!(built.grouped_checkins + built.individual_checkins, records.len());
        prop_assert!(built.users.nnz() <= built.individual_checkins);
        for g in &built.groups {
            prop_assert!(g.size() >= 2);
            for (i, &a) in g.members.iter().enumerate() {
                prop_assert!(g.members[i + 1..].iter().all(|&b| b != a));
            }
        }
    }
}
