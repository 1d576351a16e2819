use countrate::bucketing::{bucket_key, partition};
use countrate::metrics::{rps_poisson, MetricKind};
use countrate::rating::{
    anchor_scores, bias_bucket_score, bias_score_from_factor, interpolate_score, overall_score,
    WeightedScore,
};
use countrate::{
    grade_label, Grade, GradeLadder, MetricEngine, PredictionPair, ReferenceEngine,
    SubPoissonPolicy, TruncationPolicy,
};
use proptest::prelude::*;

fn pairs_strategy(max: usize) -> impl Strategy<Value = Vec<PredictionPair>> {
    prop::collection::vec((-2.5f64..2.5, 0u64..60), 1..max).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (lr, s))| PredictionPair::new(format!("p{i}"), 10f64.powf(lr), s))
            .collect()
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relative_metrics_rescale_absolute(pairs in pairs_strategy(60)) {
        let engine = MetricEngine::default();
        let total: u64 = pairs.iter().map(|p| p.actual).sum();
        prop_assume!(total > 0);
        let scale = total as f64 / pairs.len() as f64;
        for (rel, abs) in [(MetricKind::Rmae, MetricKind::Mae), (MetricKind::Rmrps, MetricKind::Mrps)] {
            let r = engine.aggregate(&pairs, rel).unwrap().value;
            let a = engine.aggregate(&pairs, abs).unwrap().value;
            prop_assert!(close(r * scale, a, 1e-12));
        }
    }

    #[test]
    fn rps_nonnegative_and_minimized_near_median(log_rate in -2.0f64..2.5) {
        let rate = 10f64.powf(log_rate);
        let cap = (rate * 3.0 + 20.0) as u64;
        let values: Vec<f64> = (0..=cap).map(|s| rps_poisson(rate, s).unwrap()).collect();
        prop_assert!(values.iter().all(|v| *v >= 0.0));
        let argmin = values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0 as i64;
        let median = countrate::CountDist::from(countrate::PoissonDist::new(rate).unwrap()).median() as i64;
        prop_assert!((argmin - median).abs() <= 1, "argmin {} median {}", argmin, median);
    }

    #[test]
    fn aggregation_is_permutation_invariant_and_splits(
        pairs in pairs_strategy(50),
        seed in any::<u64>(),
        cut in 0usize..50,
    ) {
        let engine = MetricEngine::default();
        let mut shuffled = pairs.clone();
        // deterministic Fisher-Yates from the seed
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let cut = cut.min(pairs.len());
        let (a, b) = pairs.split_at(cut);
        for kind in MetricKind::ALL {
            let whole = engine.aggregate(&pairs, kind);
            let Ok(whole) = whole else { continue };
            prop_assert!(close(whole.value, engine.aggregate(&shuffled, kind).unwrap().value, 1e-12));
            if a.is_empty() || b.is_empty() {
                continue;
            }
            let (Ok(va), Ok(vb)) = (engine.aggregate(a, kind), engine.aggregate(b, kind)) else { continue };
            let combined = match kind {
                MetricKind::Mae | MetricKind::Mrps => {
                    (va.value * va.n as f64 + vb.value * vb.n as f64) / (va.n + vb.n) as f64
                }
                MetricKind::Rmae | MetricKind::Rmrps => {
                    (va.value * va.total_actual as f64 + vb.value * vb.total_actual as f64)
                        / (va.total_actual + vb.total_actual) as f64
                }
                MetricKind::BiasFactor => {
                    (va.total_prediction + vb.total_prediction)
                        / (va.total_actual + vb.total_actual) as f64
                }
            };
            prop_assert!(close(whole.value, combined, 1e-11));
        }
    }

    #[test]
    fn partition_is_exhaustive_and_disjoint(pairs in pairs_strategy(200), n_bins in 1u32..10) {
        let buckets = partition(&pairs, n_bins).unwrap();
        let n: usize = buckets.iter().map(|b| b.len()).sum();
        prop_assert_eq!(n, pairs.len());
        let actual: u64 = buckets.iter().map(|b| b.total_actual).sum();
        prop_assert_eq!(actual, pairs.iter().map(|p| p.actual).sum::<u64>());
        let predicted: f64 = buckets.iter().map(|b| b.total_prediction).sum();
        prop_assert!(close(predicted, pairs.iter().map(|p| p.prediction).sum(), 1e-12));
        prop_assert!(buckets.windows(2).all(|w| w[0].key < w[1].key));
        for b in &buckets {
            prop_assert!(b.pairs.iter().all(|p| bucket_key(p.prediction, n_bins).unwrap() == b.key));
        }
    }

    #[test]
    fn bucket_key_is_monotone(a in 1e-4f64..1e4, b in 1e-4f64..1e4, n_bins in 1u32..10) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(bucket_key(lo, n_bins).unwrap() <= bucket_key(hi, n_bins).unwrap());
    }

    /// Coarse buckets are unions of fine ones when the fine count is an odd
    /// multiple of the coarse count.
    #[test]
    fn odd_refinement_is_exact(lr in -3.0f64..4.0, (coarse, factor) in prop::sample::select(vec![(1u32, 3u32), (1, 5), (4, 3), (2, 3)])) {
        let r = 10f64.powf(lr);
        let fine = bucket_key(r, coarse * factor).unwrap().index();
        let merged = (fine as f64 / factor as f64).round() as i64;
        prop_assert_eq!(merged, bucket_key(r, coarse).unwrap().index());
    }

    #[test]
    fn scores_are_scale_free(
        achieved in 0.01f64..20.0,
        c in 1e-3f64..1e3,
        increments in prop::array::uniform7(0.05f64..3.0),
    ) {
        let mut refs = [0.0; 7];
        let mut acc = 0.5;
        for (i, inc) in increments.iter().enumerate() {
            acc += inc;
            refs[i] = acc;
        }
        let scaled = refs.map(|r| r * c);
        let (s1, _) = interpolate_score(achieved, &refs, SubPoissonPolicy::FlagOnly).unwrap();
        let (s2, _) = interpolate_score(achieved * c, &scaled, SubPoissonPolicy::FlagOnly).unwrap();
        prop_assert!((s1 - s2).abs() < 1e-8);
    }

    #[test]
    fn bias_folding(pred in 0.5f64..1e5, actual in 1u64..100_000) {
        let ladder = GradeLadder::default();
        let b = pred / actual as f64;
        prop_assert!((bias_score_from_factor(b, &ladder) - bias_score_from_factor(1.0 / b, &ladder)).abs() < 1e-9);
        // integer totals swapped give bit-identical scores
        let p = pred.round().max(1.0);
        let x = bias_bucket_score(p, actual, &ladder, 5.0).score;
        let y = bias_bucket_score(actual as f64, p as u64, &ladder, 5.0).score;
        prop_assert_eq!(x, y);
    }

    #[test]
    fn overall_score_is_split_invariant(
        scores in prop::collection::vec((0.0f64..100.0, 1.0f64..1e4), 1..20),
        which in 0usize..20,
        frac in 0.01f64..0.99,
    ) {
        let whole: Vec<WeightedScore> = scores.iter().map(|&(score, weight)| WeightedScore { score, weight }).collect();
        let i = which % whole.len();
        let mut split = whole.clone();
        split[i].weight *= frac;
        split.push(WeightedScore { score: whole[i].score, weight: whole[i].weight * (1.0 - frac) });
        prop_assert!((overall_score(&whole).unwrap() - overall_score(&split).unwrap()).abs() < 1e-9);
    }
}

#[test]
fn anchors_label_themselves() {
    for (grade, anchor) in Grade::ALL.into_iter().zip(anchor_scores()) {
        assert_eq!(grade_label(anchor), grade);
    }
}

#[test]
fn ladder_variances_are_ordered() {
    let ladder = GradeLadder::default();
    for mu in [1e-3, 0.01, 0.5, 1.0, 10.0, 1e3, 1e5] {
        assert_eq!(ladder.grade_variance(Grade::Perfect, mu), mu);
        let v: Vec<f64> = Grade::ALL.iter().map(|&g| ladder.grade_variance(g, mu)).collect();
        assert!(v.windows(2).all(|w| w[1] > w[0]), "{mu}");
    }
}

#[test]
fn references_are_ordered_along_grades() {
    let engine = ReferenceEngine::new(GradeLadder::default(), TruncationPolicy::default());
    for mu in [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0] {
        for kind in MetricKind::ERROR_KINDS {
            let values: Vec<f64> = Grade::ALL
                .iter()
                .map(|&g| engine.expected_metric_under_grade(kind, mu, g).unwrap())
                .collect();
            if kind.absolute() == MetricKind::Mae && mu < std::f64::consts::LN_2 {
                // median 0: the error is |S| whatever the spread
                assert!(values.iter().all(|v| (v - values[0]).abs() < 1e-12 * mu));
                continue;
            }
            assert!(values.windows(2).all(|w| w[1] > w[0]), "{kind} at {mu}: {values:?}");
        }
    }
}

#[test]
fn relative_references_divide_by_rate() {
    let engine = ReferenceEngine::new(GradeLadder::default(), TruncationPolicy::default());
    for mu in [0.03, 0.8, 5.0, 77.0] {
        for grade in Grade::ALL {
            for (rel, abs) in [(MetricKind::Rmae, MetricKind::Mae), (MetricKind::Rmrps, MetricKind::Mrps)] {
                let r = engine.expected_metric_under_grade(rel, mu, grade).unwrap();
                let a = engine.expected_metric_under_grade(abs, mu, grade).unwrap();
                assert!(close(r, a / mu, 1e-12));
            }
        }
    }
}

#[test]
fn even_refinement_is_not_exact() {
    // the R = 0.5 quarter-decade bucket straddles the decade boundary
    let below = 10f64.sqrt() * (1.0 - 1e-9);
    let above = 10f64.sqrt() * (1.0 + 1e-9);
    assert_eq!(bucket_key(below, 4).unwrap(), bucket_key(above, 4).unwrap());
    assert_ne!(bucket_key(below, 1).unwrap(), bucket_key(above, 1).unwrap());
}
