//! Grade ladder and the expected metric values under each grade.
//!
//! Each grade is defined by the variance of the actuals at rate 10 and a
//! bias factor. The variance at other rates follows
//! `variance = mu + f * mu^gamma` with `f = (variance_at_10 - 10) / 10^gamma`.
//! The forecast itself always stays a Poisson with the predicted rate; only
//! the actuals are drawn from the overdispersed grade distribution.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bucketing::Bucket;
use crate::dist::{expected_abs_diff, CountDist, PoissonDist, TruncationPolicy};
use crate::error::{Error, Result};
use crate::metrics::{rate_key, MetricKind, PredictionPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Grade {
    Perfect,
    Excellent,
    Good,
    Ok,
    Fair,
    Insufficient,
    Unacceptable,
}

impl Grade {
    /// Best to worst.
    pub const ALL: [Grade; 7] = [
        Grade::Perfect,
        Grade::Excellent,
        Grade::Good,
        Grade::Ok,
        Grade::Fair,
        Grade::Insufficient,
        Grade::Unacceptable,
    ];

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn name(&self) -> &'static str {
        match self {
            Grade::Perfect => "perfect",
            Grade::Excellent => "excellent",
            Grade::Good => "good",
            Grade::Ok => "ok",
            Grade::Fair => "fair",
            Grade::Insufficient => "insufficient",
            Grade::Unacceptable => "unacceptable",
        }
    }

    /// Score anchor: 100 for perfect down to 0 for unacceptable in equal
    /// steps of 100/6.
    pub fn anchor_score(&self) -> f64 {
        100.0 * (6 - self.index()) as f64 / 6.0
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Grade {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Grade::ALL
            .into_iter()
            .find(|g| g.name() == lower)
            .ok_or_else(|| format!("unknown grade '{s}'"))
    }
}

/// One value per grade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeValues {
    pub perfect: f64,
    pub excellent: f64,
    pub good: f64,
    pub ok: f64,
    pub fair: f64,
    pub insufficient: f64,
    pub unacceptable: f64,
}

impl GradeValues {
    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            perfect: v[0],
            excellent: v[1],
            good: v[2],
            ok: v[3],
            fair: v[4],
            insufficient: v[5],
            unacceptable: v[6],
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.perfect,
            self.excellent,
            self.good,
            self.ok,
            self.fair,
            self.insufficient,
            self.unacceptable,
        ]
    }

    pub fn get(&self, grade: Grade) -> f64 {
        self.to_array()[grade.index()]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_array(self.to_array().map(f))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeLevel {
    pub grade: Grade,
    pub variance_at_10: f64,
    pub bias_factor: f64,
}

pub const DEFAULT_VARIANCES_AT_10: [f64; 7] = [10.0, 18.0, 26.0, 37.0, 48.0, 73.0, 136.0];
pub const DEFAULT_BIAS_FACTORS: [f64; 7] = [1.0, 1.015, 1.03, 1.07, 1.2, 2.0, 4.0];
pub const DEFAULT_GAMMA: f64 = 1.5;

/// Seven grades plus the overdispersion exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradeLadder {
    levels: [GradeLevel; 7],
    gamma: f64,
}

impl Default for GradeLadder {
    fn default() -> Self {
        Self::new(DEFAULT_VARIANCES_AT_10, DEFAULT_BIAS_FACTORS, DEFAULT_GAMMA)
            .expect("default ladder is valid")
    }
}

impl GradeLadder {
    pub fn new(variances_at_10: [f64; 7], bias_factors: [f64; 7], gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(Error::InvalidLadder(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if variances_at_10[0] != 10.0 || bias_factors[0] != 1.0 {
            return Err(Error::InvalidLadder(
                "perfect grade must have variance 10 at rate 10 and bias factor 1".into(),
            ));
        }
        for w in variances_at_10.windows(2) {
            if w[1] <= w[0] || !w[1].is_finite() {
                return Err(Error::InvalidLadder(format!(
                    "variances must increase strictly: {variances_at_10:?}"
                )));
            }
        }
        for w in bias_factors.windows(2) {
            if w[1] <= w[0] || !w[1].is_finite() {
                return Err(Error::InvalidLadder(format!(
                    "bias factors must increase strictly: {bias_factors:?}"
                )));
            }
        }
        let levels = std::array::from_fn(|i| GradeLevel {
            grade: Grade::ALL[i],
            variance_at_10: variances_at_10[i],
            bias_factor: bias_factors[i],
        });
        Ok(Self { levels, gamma })
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.variances_at_10(), self.bias_factors(), gamma)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn levels(&self) -> &[GradeLevel; 7] {
        &self.levels
    }

    pub fn level(&self, grade: Grade) -> &GradeLevel {
        &self.levels[grade.index()]
    }

    pub fn variances_at_10(&self) -> [f64; 7] {
        self.levels.map(|l| l.variance_at_10)
    }

    pub fn bias_factors(&self) -> [f64; 7] {
        self.levels.map(|l| l.bias_factor)
    }

    /// Overdispersion strength `f` of a grade.
    pub fn strength(&self, grade: Grade) -> f64 {
        (self.level(grade).variance_at_10 - 10.0) / 10f64.powf(self.gamma)
    }

    /// `mu + f * mu^gamma`.
    pub fn grade_variance(&self, grade: Grade, mu: f64) -> f64 {
        if grade == Grade::Perfect {
            return mu;
        }
        mu + self.strength(grade) * mu.powf(self.gamma)
    }

    /// Distribution of the actuals for a grade at the given rate.
    pub fn actual_dist(&self, grade: Grade, mu: f64) -> Result<CountDist> {
        if grade == Grade::Perfect {
            return Ok(PoissonDist::new(mu)?.into());
        }
        CountDist::with_moments(mu, self.grade_variance(grade, mu))
    }
}

/// Absolute expected metric terms for one predicted rate, all grades.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReference {
    pub rate: f64,
    pub mae: [f64; 7],
    pub mrps: [f64; 7],
}

impl RateReference {
    pub fn compute(rate: f64, ladder: &GradeLadder, policy: &TruncationPolicy) -> Result<Self> {
        let forecast = CountDist::from(PoissonDist::new(rate)?).table(policy);
        let median = forecast.median();
        let half_spread = 0.5 * forecast.expected_abs_diff_iid();
        let mut mae = [0.0; 7];
        let mut mrps = [0.0; 7];
        for grade in Grade::ALL {
            let actual = ladder.actual_dist(grade, rate)?.table(policy);
            mae[grade.index()] = actual.expected_abs_dev(median);
            mrps[grade.index()] = expected_abs_diff(&forecast, &actual) - half_spread;
        }
        Ok(Self { rate, mae, mrps })
    }

    /// Expected per-pair numerator of `kind` (relative kinds share the
    /// absolute numerator).
    pub fn absolute(&self, kind: MetricKind, grade: Grade) -> Result<f64> {
        match kind.absolute() {
            MetricKind::Mae => Ok(self.mae[grade.index()]),
            MetricKind::Mrps => Ok(self.mrps[grade.index()]),
            other => Err(Error::UnsupportedMetric(other)),
        }
    }
}

/// Memoized per-rate references keyed by rounded rate.
#[derive(Debug, Default, Clone)]
pub struct ReferenceSet {
    by_rate: HashMap<u64, RateReference>,
}

impl ReferenceSet {
    pub fn get(&self, rate: f64) -> Option<&RateReference> {
        self.by_rate.get(&rate_key(rate).to_bits())
    }

    pub fn len(&self) -> usize {
        self.by_rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_rate.is_empty()
    }
}

/// How bucket references are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Every prediction is evaluated at its own rate.
    #[default]
    PerPair,
    /// All predictions in a bucket are evaluated at the bucket center
    /// `10^R`; faster, approximate.
    BucketCenter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub metric: MetricKind,
    pub grade: Grade,
    pub rate: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCurve {
    pub metric: MetricKind,
    pub grade: Grade,
    pub points: Vec<ReferencePoint>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceEngine {
    ladder: GradeLadder,
    policy: TruncationPolicy,
}

impl ReferenceEngine {
    pub fn new(ladder: GradeLadder, policy: TruncationPolicy) -> Self {
        Self { ladder, policy }
    }

    pub fn ladder(&self) -> &GradeLadder {
        &self.ladder
    }

    pub fn rate_reference(&self, rate: f64) -> Result<RateReference> {
        RateReference::compute(rate, &self.ladder, &self.policy)
    }

    /// Computes references for every distinct rounded rate, in parallel.
    pub fn reference_set<I>(&self, rates: I) -> Result<ReferenceSet>
    where
        I: IntoIterator<Item = f64>,
    {
        let mut keys: Vec<f64> = rates.into_iter().map(rate_key).collect();
        keys.sort_by(f64::total_cmp);
        keys.dedup();
        let refs = keys
            .par_iter()
            .map(|&r| self.rate_reference(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(ReferenceSet {
            by_rate: refs.into_iter().map(|r| (r.rate.to_bits(), r)).collect(),
        })
    }

    /// Expected value of `kind` for a single prediction `mu` when actuals
    /// follow `grade`. Relative kinds divide by the expected actual `mu`.
    pub fn expected_metric_under_grade(&self, kind: MetricKind, mu: f64, grade: Grade) -> Result<f64> {
        if kind == MetricKind::BiasFactor {
            return Err(Error::UnsupportedMetric(kind));
        }
        let abs = self.rate_reference(mu)?.absolute(kind, grade)?;
        Ok(if kind.is_relative() { abs / mu } else { abs })
    }

    pub fn reference_curve(&self, kind: MetricKind, grade: Grade, rates: &[f64]) -> Result<ReferenceCurve> {
        if kind == MetricKind::BiasFactor {
            return Err(Error::UnsupportedMetric(kind));
        }
        let points = rates
            .par_iter()
            .map(|&rate| {
                Ok(ReferencePoint {
                    metric: kind,
                    grade,
                    rate,
                    value: self.expected_metric_under_grade(kind, rate, grade)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ReferenceCurve {
            metric: kind,
            grade,
            points,
        })
    }

    /// References of `kind` for a set of (clipped) predictions, aggregated
    /// like the metric itself: mean for absolute kinds, summed expectation
    /// over summed predictions for relative kinds.
    pub fn aggregate<I>(&self, kind: MetricKind, predictions: I, set: &ReferenceSet) -> Result<GradeValues>
    where
        I: IntoIterator<Item = f64>,
    {
        if kind == MetricKind::BiasFactor {
            return Err(Error::UnsupportedMetric(kind));
        }
        let mut sums = [0.0; 7];
        let mut n = 0usize;
        let mut total_prediction = 0.0;
        for rate in predictions {
            let r = match set.get(rate) {
                Some(r) => r,
                None => return Err(Error::InvalidRate(rate)),
            };
            for grade in Grade::ALL {
                sums[grade.index()] += r.absolute(kind, grade)?;
            }
            n += 1;
            total_prediction += rate;
        }
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let denom = if kind.is_relative() {
            total_prediction
        } else {
            n as f64
        };
        Ok(GradeValues::from_array(sums.map(|s| s / denom)))
    }

    /// All-grade references for a bucket.
    pub fn bucket_references(
        &self,
        kind: MetricKind,
        bucket: &Bucket,
        mode: ReferenceMode,
        set: &ReferenceSet,
    ) -> Result<GradeValues> {
        match mode {
            ReferenceMode::PerPair => {
                self.aggregate(kind, bucket.pairs.iter().map(|p| p.prediction), set)
            }
            ReferenceMode::BucketCenter => {
                let center = bucket.center_rate;
                let local;
                let set = if set.get(center).is_some() {
                    set
                } else {
                    local = self.reference_set([center])?;
                    &local
                };
                self.aggregate(kind, std::iter::once(center), set)
            }
        }
    }

    pub fn expected_bucket_reference(&self, kind: MetricKind, bucket: &Bucket, grade: Grade) -> Result<f64> {
        let set = self.reference_set(bucket.pairs.iter().map(|p| p.prediction))?;
        Ok(self
            .bucket_references(kind, bucket, ReferenceMode::PerPair, &set)?
            .get(grade))
    }

    /// Reference for a whole (clipped) dataset.
    pub fn expected_overall_reference(
        &self,
        kind: MetricKind,
        pairs: &[PredictionPair],
        grade: Grade,
    ) -> Result<f64> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let set = self.reference_set(pairs.iter().map(|p| p.prediction))?;
        Ok(self
            .aggregate(kind, pairs.iter().map(|p| p.prediction), &set)?
            .get(grade))
    }
}

/// `n` log-spaced rates from `low` to `high` inclusive.
pub fn log_grid(low: f64, high: f64, n: usize) -> Result<Vec<f64>> {
    if !(low > 0.0 && high >= low && low.is_finite() && high.is_finite()) || n == 0 {
        return Err(Error::InvalidSpec(format!(
            "rate grid needs 0 < low <= high and n >= 1, got [{low}, {high}] with n={n}"
        )));
    }
    if n == 1 {
        return Ok(vec![low]);
    }
    let (a, b) = (low.log10(), high.log10());
    Ok((0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn good_variance_at_ten() {
        let ladder = GradeLadder::default();
        assert!((ladder.grade_variance(Grade::Good, 10.0) - 26.0).abs() < 1e-12);
        assert_eq!(ladder.grade_variance(Grade::Perfect, 3.7), 3.7);
        let f_good = 16.0 / 10f64.powf(1.5);
        assert!((ladder.strength(Grade::Good) - f_good).abs() < 1e-12);
        assert!((ladder.grade_variance(Grade::Good, 1.0) - (1.0 + f_good)).abs() < 1e-12);
        assert!((f_good - 0.50596).abs() < 1e-5);
    }

    #[test]
    fn ladder_variances_reproduced_at_ten() {
        let ladder = GradeLadder::default();
        for (g, v) in Grade::ALL.iter().zip(DEFAULT_VARIANCES_AT_10) {
            assert!((ladder.grade_variance(*g, 10.0) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn strength_strictly_increasing() {
        let ladder = GradeLadder::default();
        let f: Vec<f64> = Grade::ALL.iter().map(|g| ladder.strength(*g)).collect();
        assert_eq!(f[0], 0.0);
        assert!(f.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn invalid_ladders() {
        let mut v = DEFAULT_VARIANCES_AT_10;
        v[3] = v[2];
        assert!(GradeLadder::new(v, DEFAULT_BIAS_FACTORS, 1.5).is_err());
        let mut b = DEFAULT_BIAS_FACTORS;
        b[0] = 1.01;
        assert!(GradeLadder::new(DEFAULT_VARIANCES_AT_10, b, 1.5).is_err());
        assert!(GradeLadder::new(DEFAULT_VARIANCES_AT_10, DEFAULT_BIAS_FACTORS, 0.0).is_err());
    }

    #[test]
    fn anchors_equally_spaced() {
        let anchors: Vec<f64> = Grade::ALL.iter().map(|g| g.anchor_score()).collect();
        assert_eq!(anchors[0], 100.0);
        assert_eq!(anchors[6], 0.0);
        assert!((anchors[2] - 66.666_666_666_666_67).abs() < 1e-12);
    }

    #[test]
    fn bias_factor_has_no_reference() {
        let engine = ReferenceEngine::default();
        assert!(matches!(
            engine.expected_metric_under_grade(MetricKind::BiasFactor, 1.0, Grade::Good),
            Err(Error::UnsupportedMetric(_))
        ));
    }

    #[test]
    fn relative_reference_is_absolute_over_rate() {
        let engine = ReferenceEngine::default();
        for mu in [0.3, 4.0, 55.0] {
            for g in Grade::ALL {
                let mae = engine.expected_metric_under_grade(MetricKind::Mae, mu, g).unwrap();
                let rmae = engine.expected_metric_under_grade(MetricKind::Rmae, mu, g).unwrap();
                assert!((rmae - mae / mu).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn grid() {
        let g = log_grid(0.01, 1000.0, 6).unwrap();
        assert_eq!(g.len(), 6);
        assert!((g[0] - 0.01).abs() < 1e-15 && (g[5] - 1000.0).abs() < 1e-9);
        assert_eq!(log_grid(5.0, 5.0, 1).unwrap(), vec![5.0]);
        assert!(log_grid(0.0, 1.0, 3).is_err());
    }
}
