//! Monte-Carlo checks of the metric and reference expectations, and of the
//! synthetic generators.

use std::collections::BTreeMap;

use countrate::datagen::{
    gen_graded_pairs, gen_panel, gen_poisson_pairs, simple_28_day_model, GenSpec, RateLaw,
    SeriesPanel,
};
use countrate::{
    bucket_key, partition, CountDist, Grade, GradeLadder, MetricEngine, MetricKind, PoissonDist,
    Rater, RatingConfig, ReferenceEngine, TruncationPolicy,
};

fn mean_and_sigma(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn within(value: f64, expected: f64, sigma: f64, k: f64) -> bool {
    (value - expected).abs() <= k * sigma
}

#[test]
fn metrics_converge_to_expectations() {
    let engine = MetricEngine::default();
    for (i, rate) in [0.3, 3.0, 30.0].into_iter().enumerate() {
        let spec = GenSpec::poisson(100 + i as u64, 100_000, RateLaw::Fixed(rate));
        let pairs = gen_poisson_pairs(&spec).unwrap();
        let terms = engine.terms(&pairs).unwrap();
        let dist = CountDist::from(PoissonDist::new(rate).unwrap());

        let abs: Vec<f64> = terms.iter().map(|t| t.abs_error).collect();
        let (m, s) = mean_and_sigma(&abs);
        let expected = dist.expected_abs_dev(dist.median());
        assert!(within(m, expected, s, 3.0), "MAE {rate}: {m} vs {expected}");

        let rps: Vec<f64> = terms.iter().map(|t| t.rps).collect();
        let (m, s) = mean_and_sigma(&rps);
        let expected = 0.5 * dist.expected_abs_diff_iid();
        assert!(within(m, expected, s, 3.0), "MRPS {rate}: {m} vs {expected}");

        let counts: Vec<f64> = pairs.iter().map(|p| p.actual as f64).collect();
        let (m, s) = mean_and_sigma(&counts);
        assert!(within(m, rate, s, 3.0), "mean {rate}: {m}");
    }
}

#[test]
fn bias_multiplier_shows_in_bias_factor() {
    let mut spec = GenSpec::poisson(7, 100_000, RateLaw::Fixed(10.0));
    spec.bias_multiplier = 1.2;
    let pairs = gen_poisson_pairs(&spec).unwrap();
    let b = MetricEngine::default()
        .aggregate(&pairs, MetricKind::BiasFactor)
        .unwrap();
    let relative_sigma = 1.0 / (b.total_actual as f64).sqrt();
    assert!(within(b.value, 1.2, 1.2 * relative_sigma, 3.0), "{}", b.value);
}

/// Sample variance and its standard error from the fourth central moment.
fn variance_check(counts: &[f64], dist: &CountDist) -> (f64, f64, f64) {
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let table = dist.table(&TruncationPolicy::default());
    let mu = dist.mean();
    let m4: f64 = table
        .pmf_slice()
        .iter()
        .enumerate()
        .map(|(k, p)| p * (k as f64 - mu).powi(4))
        .sum();
    let v = dist.variance();
    (var, v, ((m4 - v * v) / n).sqrt())
}

#[test]
fn graded_moments() {
    let ladder = GradeLadder::default();
    let cases = [
        (Grade::Good, 10.0, 26.0),
        (Grade::Fair, 1.0, 1.0 + 38.0 / 10f64.powf(1.5)),
        (Grade::Unacceptable, 0.2, 0.2 + 126.0 / 10f64.powf(1.5) * 0.2f64.powf(1.5)),
    ];
    for (i, (grade, mu, variance)) in cases.into_iter().enumerate() {
        let spec = GenSpec {
            grade: Some(grade),
            ..GenSpec::poisson(200 + i as u64, 1_000_000, RateLaw::Fixed(mu))
        };
        let counts: Vec<f64> = gen_graded_pairs(&spec, &ladder)
            .unwrap()
            .iter()
            .map(|p| p.actual as f64)
            .collect();
        let (m, s) = mean_and_sigma(&counts);
        assert!(within(m, mu, s, 3.0), "{grade} mean {m}");
        let dist = ladder.actual_dist(grade, mu).unwrap();
        assert!((dist.variance() - variance).abs() < 1e-12);
        let (sample_var, want, sigma) = variance_check(&counts, &dist);
        assert!(within(sample_var, want, sigma, 3.0), "{grade} variance {sample_var} vs {want}");
    }
}

#[test]
fn references_match_sampled_grades_at_ten() {
    let ladder = GradeLadder::default();
    let references = ReferenceEngine::new(ladder, TruncationPolicy::default());
    let engine = MetricEngine::default();
    for (i, grade) in Grade::ALL.into_iter().enumerate() {
        let spec = GenSpec {
            grade: Some(grade),
            ..GenSpec::poisson(300 + i as u64, 1_000_000, RateLaw::Fixed(10.0))
        };
        let terms = engine.terms(&gen_graded_pairs(&spec, &ladder).unwrap()).unwrap();
        for kind in [MetricKind::Mae, MetricKind::Mrps] {
            let values: Vec<f64> = terms
                .iter()
                .map(|t| if kind == MetricKind::Mae { t.abs_error } else { t.rps })
                .collect();
            let (m, s) = mean_and_sigma(&values);
            let expected = references.expected_metric_under_grade(kind, 10.0, grade).unwrap();
            assert!(within(m, expected, s, 3.0), "{kind} {grade}: {m} vs {expected}");
        }
    }
}

#[test]
fn log_uniform_populations_are_flat() {
    let n = 200_000;
    let (low, high) = (0.05f64, 50.0f64);
    let spec = GenSpec::poisson(11, n, RateLaw::LogUniform { low, high });
    let pairs = gen_poisson_pairs(&spec).unwrap();
    let (a, b) = (low.log10(), high.log10());
    for bucket in partition(&pairs, 4).unwrap() {
        let r = bucket.key.log_rate();
        let overlap = ((r + 0.125).min(b) - (r - 0.125).max(a)).max(0.0);
        let p = overlap / (b - a);
        let expected = n as f64 * p;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!(
            within(bucket.len() as f64, expected, sigma, 4.0),
            "bucket {r}: {} vs {expected}",
            bucket.len()
        );
    }
}

#[test]
fn generation_and_rating_ignore_thread_count() {
    let spec = GenSpec::poisson(5, 20_000, RateLaw::LogUniform { low: 0.05, high: 50.0 });
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let run = || {
        let pairs = gen_poisson_pairs(&spec).unwrap();
        let rating = Rater::new(RatingConfig::default()).unwrap().rate(&pairs).unwrap();
        (pairs, rating)
    };
    let (p1, r1) = single.install(run);
    let (p4, r4) = many.install(run);
    assert_eq!(p1, p4);
    assert_eq!(r1, r4);
}

fn periodic_panel(pattern: [u32; 7], offset: usize, days: usize) -> SeriesPanel {
    SeriesPanel {
        ids: vec!["x".into()],
        groups: vec![BTreeMap::new()],
        counts: vec![(0..days).map(|t| pattern[(t + offset) % 7]).collect()],
        weekdays: Some((0..days).map(|t| ((t + offset) % 7) as u8).collect()),
        dates: None,
    }
}

#[test]
fn simple28_is_translation_invariant() {
    let pattern = [3, 0, 8, 1, 1, 5, 12];
    for offset in 0..7 {
        for days in [29, 40, 56] {
            let panel = periodic_panel(pattern, offset, days);
            for pair in simple_28_day_model(&panel, 1.max(days - 28).min(28)).unwrap() {
                assert_eq!(pair.prediction, pair.actual as f64);
            }
        }
    }
}

#[test]
fn simple28_is_unbiased_on_weekday_modulated_panel() {
    // base 100 and a weekday lift of 10^0.25 keep both levels at bucket centers
    let lift = 10f64.powf(0.25);
    let profile = [1.0, 1.0, 1.0, 1.0, 1.0, lift, lift];
    let spec = GenSpec::poisson(21, 2000, RateLaw::Fixed(100.0));
    let sim = gen_panel(&spec, 56, Some(profile), &GradeLadder::default()).unwrap();
    let pairs = simple_28_day_model(&sim.panel, 28).unwrap();
    let rating = Rater::new(RatingConfig::default()).unwrap().rate(&pairs).unwrap();
    let main: Vec<_> = rating.buckets.iter().filter(|b| b.n > 1000).collect();
    assert_eq!(main.len(), 2);
    for b in main {
        assert_eq!(b.key, bucket_key(b.center_rate, 4).unwrap());
        let sigma = 1.0 / (b.total_actual as f64).sqrt();
        let f = b.bias_factor.unwrap();
        assert!(within(f, 1.0, sigma, 4.0), "bucket {}: {f}", b.log_rate);
    }
}
