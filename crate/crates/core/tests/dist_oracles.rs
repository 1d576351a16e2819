use countrate::dist::{expected_abs_diff, nb_from_mean_variance, CountDist, PoissonDist};
use countrate::{Grade, GradeLadder, TruncationPolicy};
use proptest::prelude::*;

fn poisson(mu: f64) -> CountDist {
    PoissonDist::new(mu).unwrap().into()
}

fn nb(mu: f64, variance: f64) -> CountDist {
    nb_from_mean_variance(mu, variance).unwrap().into()
}

/// Poisson pmf from the recurrence p(k) = p(k-1) mu / k, in log space.
fn oracle_poisson(mu: f64, cap: usize) -> Vec<f64> {
    let mut ln_p = -mu;
    (0..=cap)
        .map(|k| {
            if k > 0 {
                ln_p += mu.ln() - (k as f64).ln();
            }
            ln_p.exp()
        })
        .collect()
}

fn oracle_nb(mu: f64, variance: f64, cap: usize) -> Vec<f64> {
    let r = mu * mu / (variance - mu);
    let q = (variance - mu) / variance;
    let mut ln_c = 0.0;
    (0..=cap)
        .map(|k| {
            if k > 0 {
                ln_c += (r + k as f64 - 1.0).ln() - (k as f64).ln();
            }
            (ln_c + r * (1.0 - q).ln() + k as f64 * q.ln()).exp()
        })
        .collect()
}

fn double_sum(a: &[f64], b: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, pa) in a.iter().enumerate() {
        for (j, pb) in b.iter().enumerate() {
            total += pa * pb * (i as f64 - j as f64).abs();
        }
    }
    total
}

#[test]
fn pmf_matches_recurrence_oracles() {
    for mu in [0.01f64, 0.3, 1.0, 7.5, 40.0, 250.0] {
        let cap = (mu + 30.0 * mu.sqrt() + 50.0) as usize;
        let p = oracle_poisson(mu, cap);
        let d = poisson(mu);
        for (k, want) in p.iter().enumerate() {
            assert!((d.pmf(k as u64) - want).abs() < 1e-13 * want.max(1e-300).max(1.0), "poisson {mu} {k}");
        }
        let variance = mu + 0.8 * mu.powf(1.5);
        let q = oracle_nb(mu, variance, cap * 3);
        let d = nb(mu, variance);
        for (k, want) in q.iter().enumerate() {
            assert!((d.pmf(k as u64) - want).abs() < 1e-12, "nb {mu} {k}");
        }
    }
}

#[test]
fn cross_abs_diff_matches_double_sum() {
    let policy = TruncationPolicy::default();
    let ladder = GradeLadder::default();
    for mu in [0.05f64, 0.9, 4.0, 30.0] {
        let pois = poisson(mu).table(&policy);
        for grade in Grade::ALL {
            let var = ladder.grade_variance(grade, mu);
            let actual = ladder.actual_dist(grade, mu).unwrap().table(&policy);
            let cap = (mu + 40.0 * var.sqrt() + 80.0) as usize;
            let a = oracle_poisson(mu, cap);
            let b = if grade == Grade::Perfect {
                oracle_poisson(mu, cap)
            } else {
                oracle_nb(mu, var, cap * 2)
            };
            let want = double_sum(&a, &b);
            let got = expected_abs_diff(&pois, &actual);
            assert!((got - want).abs() < 1e-9, "{mu} {grade}: {got} vs {want}");
            assert!((actual.expected_abs_diff_iid() - double_sum(&b, &b)).abs() < 1e-9);
        }
    }
}

#[test]
fn nb_converges_to_poisson() {
    for mu in [0.1, 1.0, 10.0, 100.0] {
        let p = poisson(mu);
        let n = nb(mu, mu * (1.0 + 1e-6));
        let sup = (0..(mu as u64 * 3 + 30))
            .map(|k| (p.pmf(k) - n.pmf(k)).abs())
            .fold(0.0, f64::max);
        assert!(sup < 1e-4, "{mu}: {sup}");
    }
}

#[test]
fn abs_dev_is_convex_with_minimum_at_median() {
    let ladder = GradeLadder::default();
    for mu in [0.2, 0.69, 0.71, 3.3, 12.0, 150.0] {
        for dist in [poisson(mu), nb(mu, ladder.grade_variance(Grade::Fair, mu))] {
            let cap = (mu * 3.0 + 30.0) as u64;
            let f: Vec<f64> = (0..=cap).map(|s| dist.expected_abs_dev(s)).collect();
            for w in f.windows(3) {
                assert!(w[0] + w[2] - 2.0 * w[1] >= -1e-12);
            }
            let argmin = f
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0 as u64;
            let m = dist.median();
            assert!((f[m as usize] - f[argmin as usize]).abs() < 1e-12, "{mu}");
        }
    }
}

fn grade_strategy() -> impl Strategy<Value = Grade> {
    prop::sample::select(Grade::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization(log_mu in -4.0f64..4.0, grade in grade_strategy()) {
        let mu = 10f64.powf(log_mu);
        let policy = TruncationPolicy::default();
        let dist = GradeLadder::default().actual_dist(grade, mu).unwrap();
        let mass: f64 = dist.table(&policy).pmf_slice().iter().sum();
        prop_assert!(mass >= 1.0 - policy.tail_tolerance());
        prop_assert!(mass <= 1.0 + 1e-9);
    }

    #[test]
    fn moments(log_mu in -4.0f64..4.0, grade in grade_strategy()) {
        let mu = 10f64.powf(log_mu);
        let ladder = GradeLadder::default();
        let variance = ladder.grade_variance(grade, mu);
        let table = ladder.actual_dist(grade, mu).unwrap().table(&TruncationPolicy::default());
        let pmf = table.pmf_slice();
        let m1: f64 = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let m2: f64 = pmf.iter().enumerate().map(|(k, p)| (k as f64 - mu).powi(2) * p).sum();
        prop_assert!((m1 - mu).abs() <= 1e-8 * mu, "mean {} vs {}", m1, mu);
        prop_assert!((m2 - variance).abs() <= 1e-8 * variance, "variance {} vs {}", m2, variance);
    }

    #[test]
    fn cdf_is_monotone_and_reaches_one(log_mu in -2.0f64..3.0) {
        let table = poisson(10f64.powf(log_mu)).table(&TruncationPolicy::default());
        let mut prev = 0.0;
        for k in 0..table.len() as u64 + 5 {
            let c = table.cdf(k);
            prop_assert!(c >= prev);
            prop_assert!((c + table.sf(k) - 1.0).abs() < 1e-9);
            prev = c;
        }
        prop_assert!((prev - 1.0).abs() < 1e-9);
    }
}
