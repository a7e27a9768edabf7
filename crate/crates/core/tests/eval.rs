mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::*;
use ensat_core::eval::{
    auc, average_precision, baseline_scores, build_eval_set, evaluate_baseline, fit_predictor, group_by_node,
    map_metric, score_metrics, Baseline, LabeledPair, PredictorConfig, Split, SplitFractions,
};
use ensat_core::synth::{gen_periodic, gen_recency, SynthConfig};
use ensat_core::{Predictor, Tensor};

fn brute_force_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut hits, mut total) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                total += 1.0;
                if si > sj {
                    hits += 1.0;
                } else if si == sj {
                    hits += 0.5;
                }
            }
        }
    }
    hits / total
}

/// AP from the definition: precision at the rank of each positive.
fn direct_ap(mut items: Vec<(usize, f64, bool)>) -> Option<f64> {
    items.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let positives: Vec<usize> = (0..items.len()).filter(|&k| items[k].2).collect();
    if positives.is_empty() {
        return None;
    }
    let sum: f64 = positives
        .iter()
        .map(|&k| items[..=k].iter().filter(|c| c.2).count() as f64 / (k + 1) as f64)
        .sum();
    Some(sum / positives.len() as f64)
}

fn scored_labels() -> impl Strategy<Value = Vec<(f64, bool)>> {
    // a coarse score grid makes ties common
    prop::collection::vec(((0u8..12).prop_map(|s| s as f64 / 4.0), any::<bool>()), 2..40)
        .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn auc_matches_pairwise_count(items in scored_labels()) {
        let scores: Vec<f64> = items.iter().map(|x| x.0).collect();
        let labels: Vec<bool> = items.iter().map(|x| x.1).collect();
        let got = auc(&scores, &labels).unwrap();
        prop_assert!((got - brute_force_auc(&scores, &labels)).abs() <= 1e-12);
    }

    #[test]
    fn map_matches_direct_average_precision(
        pairs in prop::collection::btree_set((0usize..8, 0usize..8), 2..30),
        seed in any::<u64>(),
    ) {
        let pairs: Vec<(usize, usize)> = pairs.into_iter().filter(|(u, v)| u < v).collect();
        prop_assume!(!pairs.is_empty());
        let mut state = seed;
        let mut next = || { state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); state >> 33 };
        let scores: Vec<f64> = pairs.iter().map(|_| (next() % 5) as f64).collect();
        let labels: Vec<bool> = pairs.iter().map(|_| next() % 2 == 0).collect();
        prop_assume!(labels.iter().any(|&l| l));

        let mut expected = Vec::new();
        for node in 0..8 {
            let items: Vec<(usize, f64, bool)> = pairs
                .iter()
                .zip(&scores)
                .zip(&labels)
                .filter(|((p, _), _)| p.0 == node || p.1 == node)
                .map(|((p, &s), &l)| (if p.0 == node { p.1 } else { p.0 }, s, l))
                .collect();
            if let Some(ap) = direct_ap(items) {
                expected.push(ap);
            }
        }
        let expected = expected.iter().sum::<f64>() / expected.len() as f64;
        let got = map_metric(&group_by_node(&pairs, &scores, &labels)).unwrap();
        prop_assert!((got - expected).abs() <= 1e-12);
    }

    #[test]
    fn auc_is_in_unit_interval_and_flips_with_scores(items in scored_labels()) {
        let scores: Vec<f64> = items.iter().map(|x| x.0).collect();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let labels: Vec<bool> = items.iter().map(|x| x.1).collect();
        let a = auc(&scores, &labels).unwrap();
        let b = auc(&neg, &labels).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a + b - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn metric_hand_examples() {
    assert_eq!(auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
    assert_eq!(auc(&[0.3, 0.3, 0.3], &[true, false, true]).unwrap(), 0.5);
    assert_eq!(auc(&[0.8, 0.6, 0.4], &[true, false, true]).unwrap(), 0.5);
    assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
    let ap = average_precision(&[true, false, true]).unwrap();
    assert!((ap - (1.0 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
}

fn periodic_pairs(seed: u64) -> (ensat_core::synth::SynthGraph, ensat_core::EvalPairSet) {
    let g = gen_periodic(&SynthConfig { seed, ..SynthConfig::default() }).unwrap();
    let set = build_eval_set(&g.history, &g.target, SplitFractions::default(), seed).unwrap();
    (g, set)
}

#[test]
fn eval_set_invariants() {
    for seed in 0..5 {
        let (g, set) = periodic_pairs(seed);
        let active = g.history.active_nodes();
        let mut seen = BTreeSet::new();
        for p in set.all() {
            assert!(p.u < p.v);
            assert!(active[p.u] && active[p.v]);
            assert_eq!(p.label, g.target.has_edge(p.u, p.v));
            assert!(seen.insert((p.u, p.v)), "duplicate pair");
        }
        let positives = g
            .target
            .edges()
            .filter(|&(u, v, _)| active[u] && active[v])
            .count();
        assert_eq!(set.num_positives(), positives);
        assert_eq!(set.num_negatives(), positives);
        let (tr, va, _) = SplitFractions::default().sizes(positives);
        for (split, expect) in [(Split::Train, tr), (Split::Val, va)] {
            let part = set.split(split);
            assert_eq!(part.iter().filter(|p| p.label).count(), expect);
            assert_eq!(part.iter().filter(|p| !p.label).count(), expect);
        }
    }
}

#[test]
fn eval_set_is_reproducible_and_seed_sensitive() {
    let (g, a) = periodic_pairs(3);
    let b = build_eval_set(&g.history, &g.target, SplitFractions::default(), 3).unwrap();
    let c = build_eval_set(&g.history, &g.target, SplitFractions::default(), 4).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.fingerprint(), b.fingerprint());
    assert_ne!(a.fingerprint(), c.fingerprint());
    assert_eq!(a.fingerprint().len(), 64);
}

#[test]
fn dense_target_is_rejected() {
    let full: Vec<(usize, usize)> = (0..4).flat_map(|u| (u + 1..4).map(move |v| (u, v))).collect();
    let seq = sequence(4, &[&full, &full]);
    let (history, target) = seq.history_and_target(1).unwrap();
    assert!(build_eval_set(&history, &target, SplitFractions::default(), 0).is_err());
}

fn pair(u: usize, v: usize, label: bool) -> LabeledPair {
    LabeledPair { u, v, label }
}

#[test]
fn predictor_separates_separable_pairs() {
    // the first coordinate is positive exactly for nodes 0..4
    let z = Tensor::from_fn(&[8, 2], |i| {
        let (v, c) = (i / 2, i % 2);
        if c == 0 {
            if v < 4 { 1.0 } else { -1.0 }
        } else {
            0.1 * v as f64
        }
    });
    let pairs = vec![
        pair(0, 1, true),
        pair(1, 2, true),
        pair(2, 3, true),
        pair(0, 3, true),
        pair(4, 5, false),
        pair(5, 6, false),
        pair(6, 7, false),
        pair(4, 7, false),
    ];
    let p = fit_predictor(&pairs, &z, &PredictorConfig { epochs: 200, lr: 0.05 }).unwrap();
    for q in &pairs {
        let s = p.symmetric_score(z.row(&[q.u]), z.row(&[q.v]));
        assert_eq!(s > 0.5, q.label);
    }
}

#[test]
fn zero_embeddings_learn_only_the_base_rate() {
    let z = Tensor::zeros(&[5, 3]);
    let pairs = vec![pair(0, 1, true), pair(1, 2, true), pair(2, 3, true), pair(3, 4, false)];
    let p = fit_predictor(&pairs, &z, &PredictorConfig { epochs: 2000, lr: 0.05 }).unwrap();
    assert!(p.weights.iter().all(|&w| w == 0.0));
    assert!((p.bias - 3f64.ln()).abs() < 1e-3);
    let scores = p.score_pairs(&z, &pairs);
    let labels: Vec<bool> = pairs.iter().map(|q| q.label).collect();
    assert_eq!(auc(&scores, &labels).unwrap(), 0.5);
}

#[test]
fn duplicated_training_set_gives_the_same_predictor() {
    let z = Tensor::from_fn(&[6, 2], |i| ((i * 7 % 5) as f64 - 2.0) / 3.0);
    let pairs = vec![pair(0, 1, true), pair(2, 3, false), pair(4, 5, true), pair(1, 4, false)];
    let mut doubled = pairs.clone();
    doubled.extend(pairs.iter().cloned());
    let cfg = PredictorConfig::default();
    let a = fit_predictor(&pairs, &z, &cfg).unwrap();
    let b = fit_predictor(&doubled, &z, &cfg).unwrap();
    assert!(max_abs(&a.weights, &b.weights) < 1e-10);
    assert!((a.bias - b.bias).abs() < 1e-10);
}

#[test]
fn single_class_training_split_is_an_error() {
    let z = Tensor::zeros(&[3, 2]);
    assert!(fit_predictor(&[pair(0, 1, true), pair(1, 2, true)], &z, &PredictorConfig::default()).is_err());
}

#[test]
fn link_probability_hand_values() {
    let mut p = Predictor::zeros(3);
    assert_eq!(p.link_probability(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]), 0.5);
    p.weights = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    let y = p.link_probability(&[1.0, 0.3, -2.0], &[1.0, 7.0, 0.0]);
    assert!((y - 0.88080).abs() < 1e-5);
    p.weights = vec![0.2, -1.0, 0.5, 0.7, 0.1, -0.3];
    let (a, b) = ([0.1, 0.2, 0.3], [-0.4, 0.5, 0.9]);
    assert_eq!(p.symmetric_score(&a, &b), p.symmetric_score(&b, &a));
}

#[test]
fn periodic_graphs_defeat_the_last_snapshot() {
    for seed in 0..3 {
        let (g, set) = periodic_pairs(seed);
        let all: Vec<LabeledPair> = set.all().cloned().collect();
        let last = evaluate_baseline(&g.history, &all, Baseline::LastAdjacency).unwrap();
        let cn = evaluate_baseline(&g.history, &all, Baseline::AggregatedCommonNeighbors).unwrap();
        assert!(last.auc < cn.auc, "seed {seed}: {} vs {}", last.auc, cn.auc);
    }
}

#[test]
fn persistent_graphs_favor_the_last_snapshot() {
    for seed in 0..3 {
        let g = gen_recency(&SynthConfig { seed, ..SynthConfig::default() }).unwrap();
        let set = build_eval_set(&g.history, &g.target, SplitFractions::default(), seed).unwrap();
        let all: Vec<LabeledPair> = set.all().cloned().collect();
        let last = evaluate_baseline(&g.history, &all, Baseline::LastAdjacency).unwrap();
        assert!(last.auc > 0.7, "seed {seed}: {}", last.auc);
    }
}

#[test]
fn baseline_hand_scores() {
    let seq = sequence(4, &[&[(0, 1), (1, 2)], &[(0, 2), (2, 3)]]);
    let pairs = [pair(0, 2, true), pair(1, 3, false), pair(0, 3, false)];
    assert_eq!(baseline_scores(&seq, &pairs, Baseline::LastAdjacency), vec![1.0, 0.0, 0.0]);
    // aggregate: 0-1, 1-2, 0-2, 2-3
    assert_eq!(
        baseline_scores(&seq, &pairs, Baseline::AggregatedCommonNeighbors),
        vec![1.0, 1.0, 1.0]
    );
    let s = score_metrics(&pairs, &[0.9, 0.1, 0.2]).unwrap();
    assert_eq!((s.auc, s.n_pos, s.n_neg), (1.0, 1, 2));
}
