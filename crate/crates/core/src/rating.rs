//! Scores, grades and overall ratings.
//!
//! A bucket's achieved metric is placed between the grade reference values
//! and mapped to a score by linear interpolation between the grade anchors
//! (100 for perfect, 0 for unacceptable, equally spaced in between). Bias is
//! scored the same way on the ladder's bias factors. Overall scores are
//! weighted means of bucket scores, weighted by observed sales.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bucketing::{partition, BucketKey, DEFAULT_N_BINS};
use crate::dist::TruncationPolicy;
use crate::error::{Error, Result};
use crate::metrics::{aggregate_terms, MetricEngine, MetricKind, PairTerms, PredictionPair, DEFAULT_CLIP};
use crate::reference::{Grade, GradeLadder, GradeValues, ReferenceEngine, ReferenceMode};

/// Grade anchor scores, best to worst.
pub fn anchor_scores() -> [f64; 7] {
    Grade::ALL.map(|g| g.anchor_score())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BucketFlag {
    /// Achieved metric below the Poisson ideal.
    SubPoissonian,
    /// No observed sales despite a substantial predicted total.
    ZeroActuals,
    /// No observed sales and too little predicted volume to judge.
    LowEvidence,
    /// Grade references do not separate (e.g. MAE where every median is 0).
    DegenerateReferences,
}

/// Treatment of buckets that beat the Poisson ideal.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubPoissonPolicy {
    /// Score 100 and raise [`BucketFlag::SubPoissonian`].
    #[default]
    FlagOnly,
    /// Score the bucket with a fixed value (and still flag it).
    CriticalScore(f64),
}

/// Maps an achieved value onto the anchor scale.
pub fn interpolate_score(
    achieved: f64,
    references: &[f64; 7],
    policy: SubPoissonPolicy,
) -> Result<(f64, BTreeSet<BucketFlag>)> {
    if references.windows(2).any(|w| w[1] <= w[0] || w[1].is_nan()) {
        return Err(Error::NonMonotoneReferences(references.to_vec()));
    }
    let anchors = anchor_scores();
    let mut flags = BTreeSet::new();
    if achieved < references[0] {
        flags.insert(BucketFlag::SubPoissonian);
        let score = match policy {
            SubPoissonPolicy::FlagOnly => 100.0,
            SubPoissonPolicy::CriticalScore(s) => s,
        };
        return Ok((score, flags));
    }
    if achieved >= references[6] {
        return Ok((0.0, flags));
    }
    let i = references.partition_point(|&r| r <= achieved) - 1;
    let t = (achieved - references[i]) / (references[i + 1] - references[i]);
    Ok((anchors[i] + t * (anchors[i + 1] - anchors[i]), flags))
}

/// Grade whose anchor is nearest to `score`; ties go to the better grade.
pub fn grade_label(score: f64) -> Grade {
    let mut best = Grade::Perfect;
    let mut best_dist = f64::INFINITY;
    for grade in Grade::ALL {
        let d = (score - grade.anchor_score()).abs();
        if d < best_dist - 1e-9 {
            best = grade;
            best_dist = d;
        }
    }
    best
}

/// Bias score from a bias factor folded to `>= 1`.
fn bias_score_folded(folded: f64, ladder: &GradeLadder) -> f64 {
    let factors = ladder.bias_factors();
    let anchors = anchor_scores();
    if folded <= factors[0] {
        return 100.0;
    }
    if folded >= factors[6] {
        return 0.0;
    }
    let i = factors.partition_point(|&f| f <= folded) - 1;
    let t = (folded - factors[i]) / (factors[i + 1] - factors[i]);
    anchors[i] + t * (anchors[i + 1] - anchors[i])
}

/// Bias score of a bias factor; under-forecasts are folded to `1/b`.
pub fn bias_score_from_factor(bias_factor: f64, ladder: &GradeLadder) -> f64 {
    let folded = if bias_factor >= 1.0 {
        bias_factor
    } else {
        1.0 / bias_factor
    };
    bias_score_folded(folded, ladder)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasScore {
    /// `None` when the bucket is excluded.
    pub score: Option<f64>,
    pub bias_factor: Option<f64>,
    pub flags: BTreeSet<BucketFlag>,
}

/// Bias score of a bucket from its totals.
pub fn bias_bucket_score(
    total_prediction: f64,
    total_actual: u64,
    ladder: &GradeLadder,
    low_evidence_threshold: f64,
) -> BiasScore {
    let mut flags = BTreeSet::new();
    if total_actual == 0 {
        if total_prediction >= low_evidence_threshold {
            flags.insert(BucketFlag::ZeroActuals);
            return BiasScore {
                score: Some(0.0),
                bias_factor: None,
                flags,
            };
        }
        flags.insert(BucketFlag::LowEvidence);
        return BiasScore {
            score: None,
            bias_factor: None,
            flags,
        };
    }
    let actual = total_actual as f64;
    // fold on the totals so that swapping them gives bit-identical scores
    let folded = total_prediction.max(actual) / total_prediction.min(actual);
    BiasScore {
        score: Some(bias_score_folded(folded, ladder)),
        bias_factor: Some(total_prediction / actual),
        flags,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedScore {
    pub score: f64,
    pub weight: f64,
}

/// Weighted mean of bucket scores.
pub fn overall_score(scores: &[WeightedScore]) -> Result<f64> {
    let total: f64 = scores.iter().map(|s| s.weight).sum();
    if scores.is_empty() || total <= 0.0 {
        return Err(Error::NoRatableBuckets);
    }
    Ok(scores.iter().map(|s| s.score * s.weight).sum::<f64>() / total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingConfig {
    pub n_bins: u32,
    pub clip: f64,
    pub ladder: GradeLadder,
    /// Metric that drives the noise score.
    pub noise_metric: MetricKind,
    /// Metrics reported per bucket and overall.
    pub metrics: Vec<MetricKind>,
    pub sub_poisson: SubPoissonPolicy,
    /// Zero-sales buckets with less predicted volume are excluded.
    pub low_evidence_threshold: f64,
    pub reference_mode: ReferenceMode,
    pub tail_tolerance: f64,
}

impl Default for RatingConfig {
    fn default() -> Self {
        Self {
            n_bins: DEFAULT_N_BINS,
            clip: DEFAULT_CLIP,
            ladder: GradeLadder::default(),
            noise_metric: MetricKind::Rmrps,
            metrics: MetricKind::ERROR_KINDS.to_vec(),
            sub_poisson: SubPoissonPolicy::FlagOnly,
            low_evidence_threshold: 5.0,
            reference_mode: ReferenceMode::PerPair,
            tail_tolerance: TruncationPolicy::default().tail_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRating {
    pub key: BucketKey,
    pub log_rate: f64,
    pub center_rate: f64,
    pub n: usize,
    pub total_prediction: f64,
    pub total_actual: u64,
    /// `None` for relative metrics of buckets without sales.
    pub achieved: BTreeMap<MetricKind, Option<f64>>,
    pub references: BTreeMap<MetricKind, GradeValues>,
    pub noise_score: Option<f64>,
    pub bias_factor: Option<f64>,
    pub bias_score: Option<f64>,
    pub weight: f64,
    pub flags: BTreeSet<BucketFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallRating {
    pub noise_metric: MetricKind,
    pub noise_score: Option<f64>,
    pub noise_grade: Option<Grade>,
    pub bias_score: Option<f64>,
    pub bias_grade: Option<Grade>,
    pub bias_factor: Option<f64>,
    pub achieved: BTreeMap<MetricKind, Option<f64>>,
    /// Overall metric expected under each grade.
    pub references: BTreeMap<MetricKind, GradeValues>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRating {
    pub n_pairs: usize,
    pub total_prediction: f64,
    pub total_actual: u64,
    pub n_clipped: usize,
    pub overall: OverallRating,
    pub buckets: Vec<BucketRating>,
}

/// Achieved overall metric and its references per grade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallContext {
    pub metric: MetricKind,
    pub achieved: Option<f64>,
    pub references: GradeValues,
}

impl OverallContext {
    /// Grade band the achieved value falls into (first grade whose
    /// reference is not exceeded).
    pub fn band(&self) -> Option<Grade> {
        let achieved = self.achieved?;
        let refs = self.references.to_array();
        Some(
            Grade::ALL
                .into_iter()
                .find(|g| achieved <= refs[g.index()])
                .unwrap_or(Grade::Unacceptable),
        )
    }
}

fn achieved_value(terms: &[PairTerms], kind: MetricKind) -> Result<Option<f64>> {
    match aggregate_terms(terms, kind) {
        Ok(v) => Ok(Some(v.value)),
        Err(Error::ZeroActualTotal(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Runs the full bucket → score → overall pipeline.
#[derive(Debug, Clone)]
pub struct Rater {
    config: RatingConfig,
    metrics: MetricEngine,
    references: ReferenceEngine,
}

impl Rater {
    pub fn new(config: RatingConfig) -> Result<Self> {
        if config.n_bins == 0 {
            return Err(Error::InvalidBinCount);
        }
        if config.noise_metric == MetricKind::BiasFactor {
            return Err(Error::UnsupportedMetric(MetricKind::BiasFactor));
        }
        if let SubPoissonPolicy::CriticalScore(s) = config.sub_poisson {
            if !(0.0..=100.0).contains(&s) {
                return Err(Error::InvalidSpec(format!(
                    "critical score must lie in [0, 100], got {s}"
                )));
            }
        }
        if config.low_evidence_threshold.is_nan() || config.low_evidence_threshold < 0.0 {
            return Err(Error::InvalidSpec("low-evidence threshold must be >= 0".into()));
        }
        let policy = TruncationPolicy::new(config.tail_tolerance)?;
        Ok(Self {
            metrics: MetricEngine::new(config.clip, policy)?,
            references: ReferenceEngine::new(config.ladder, policy),
            config,
        })
    }

    pub fn config(&self) -> &RatingConfig {
        &self.config
    }

    pub fn metric_engine(&self) -> &MetricEngine {
        &self.metrics
    }

    pub fn reference_engine(&self) -> &ReferenceEngine {
        &self.references
    }

    fn reported_metrics(&self) -> Vec<MetricKind> {
        let mut kinds: BTreeSet<MetricKind> = self
            .config
            .metrics
            .iter()
            .copied()
            .filter(|k| *k != MetricKind::BiasFactor)
            .collect();
        kinds.insert(self.config.noise_metric);
        kinds.into_iter().collect()
    }

    /// Achieved overall metric set into the context of its grade references.
    pub fn contextualize_overall(&self, kind: MetricKind, pairs: &[PredictionPair]) -> Result<OverallContext> {
        let clipped = self.metrics.clip_pairs(pairs)?;
        if clipped.is_empty() {
            return Err(Error::EmptyInput);
        }
        let terms = self.metrics.terms(&clipped)?;
        let set = self
            .references
            .reference_set(clipped.iter().map(|p| p.prediction))?;
        Ok(OverallContext {
            metric: kind,
            achieved: achieved_value(&terms, kind)?,
            references: self
                .references
                .aggregate(kind, clipped.iter().map(|p| p.prediction), &set)?,
        })
    }

    pub fn rate(&self, pairs: &[PredictionPair]) -> Result<GroupRating> {
        if pairs.is_empty() {
            return Err(Error::EmptyInput);
        }
        let n_clipped = pairs
            .iter()
            .filter(|p| p.prediction < self.config.clip)
            .count();
        let clipped = self.metrics.clip_pairs(pairs)?;
        let buckets = partition(&clipped, self.config.n_bins)?;
        let cache = self
            .metrics
            .forecast_cache(clipped.iter().map(|p| p.prediction))?;
        let set = self
            .references
            .reference_set(clipped.iter().map(|p| p.prediction))?;
        let kinds = self.reported_metrics();
        let noise_kind = self.config.noise_metric;
        let threshold = self.config.low_evidence_threshold;

        let mut ratings = Vec::with_capacity(buckets.len());
        for bucket in &buckets {
            let terms = self.metrics.terms_with(&bucket.pairs, &cache)?;
            let mut achieved = BTreeMap::new();
            let mut references = BTreeMap::new();
            for &kind in &kinds {
                achieved.insert(kind, achieved_value(&terms, kind)?);
                references.insert(
                    kind,
                    self.references
                        .bucket_references(kind, bucket, self.config.reference_mode, &set)?,
                );
            }

            let bias = bias_bucket_score(
                bucket.total_prediction,
                bucket.total_actual,
                &self.config.ladder,
                threshold,
            );
            let mut flags = bias.flags.clone();
            let noise_score = if flags.contains(&BucketFlag::LowEvidence) {
                None
            } else {
                match achieved[&noise_kind] {
                    // relative metric without sales: infinitely bad
                    None => Some(0.0),
                    Some(value) => {
                        match interpolate_score(
                            value,
                            &references[&noise_kind].to_array(),
                            self.config.sub_poisson,
                        ) {
                            Ok((score, f)) => {
                                flags.extend(f);
                                Some(score)
                            }
                            Err(Error::NonMonotoneReferences(_)) => {
                                flags.insert(BucketFlag::DegenerateReferences);
                                None
                            }
                            Err(e) => return Err(e),
                        }
                    }
                }
            };

            ratings.push(BucketRating {
                key: bucket.key,
                log_rate: bucket.key.log_rate(),
                center_rate: bucket.center_rate,
                n: bucket.len(),
                total_prediction: bucket.total_prediction,
                total_actual: bucket.total_actual,
                achieved,
                references,
                noise_score,
                bias_factor: bias.bias_factor,
                bias_score: bias.score,
                weight: 0.0,
                flags,
            });
        }

        for b in &mut ratings {
            b.weight = if b.total_actual > 0 {
                b.total_actual as f64
            } else {
                b.total_prediction
            };
        }

        let weighted = |pick: fn(&BucketRating) -> Option<f64>| -> Option<f64> {
            let scores: Vec<WeightedScore> = ratings
                .iter()
                .filter_map(|b| {
                    pick(b).map(|score| WeightedScore {
                        score,
                        weight: b.weight,
                    })
                })
                .collect();
            overall_score(&scores).ok()
        };
        let noise_score = weighted(|b| b.noise_score);
        let bias_score = weighted(|b| b.bias_score);

        let all_terms = self.metrics.terms_with(&clipped, &cache)?;
        let mut achieved = BTreeMap::new();
        let mut references = BTreeMap::new();
        for &kind in &kinds {
            achieved.insert(kind, achieved_value(&all_terms, kind)?);
            references.insert(
                kind,
                self.references
                    .aggregate(kind, clipped.iter().map(|p| p.prediction), &set)?,
            );
        }
        let total_prediction: f64 = clipped.iter().map(|p| p.prediction).sum();
        let total_actual: u64 = clipped.iter().map(|p| p.actual).sum();

        Ok(GroupRating {
            n_pairs: clipped.len(),
            total_prediction,
            total_actual,
            n_clipped,
            overall: OverallRating {
                noise_metric: noise_kind,
                noise_score,
                noise_grade: noise_score.map(grade_label),
                bias_score,
                bias_grade: bias_score.map(grade_label),
                bias_factor: (total_actual > 0).then(|| total_prediction / total_actual as f64),
                achieved,
                references,
            },
            buckets: ratings,
        })
    }
}
