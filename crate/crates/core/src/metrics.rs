//! Forecast metrics on prediction/actual pairs: (R)MAE with the Poisson
//! median as point forecast, (R)MRPS and the bias factor.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{CountTable, PoissonDist, TruncationPolicy};
use crate::error::{Error, Result};

/// Predictions below this floor are raised to it before any computation.
pub const DEFAULT_CLIP: f64 = 0.01;

/// One forecasted rate with its observed count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionPair {
    pub id: String,
    pub prediction: f64,
    pub actual: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub groups: BTreeMap<String, String>,
}

impl PredictionPair {
    pub fn new(id: impl Into<String>, prediction: f64, actual: u64) -> Self {
        Self {
            id: id.into(),
            prediction,
            actual,
            groups: BTreeMap::new(),
        }
    }

    pub fn with_group(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.groups.insert(name.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    #[serde(rename = "MAE")]
    Mae,
    #[serde(rename = "RMAE")]
    Rmae,
    #[serde(rename = "MRPS")]
    Mrps,
    #[serde(rename = "RMRPS")]
    Rmrps,
    #[serde(rename = "BIAS_FACTOR")]
    BiasFactor,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::Mae,
        MetricKind::Rmae,
        MetricKind::Mrps,
        MetricKind::Rmrps,
        MetricKind::BiasFactor,
    ];

    /// The kinds that measure noise and have grade references.
    pub const ERROR_KINDS: [MetricKind; 4] = [
        MetricKind::Mae,
        MetricKind::Rmae,
        MetricKind::Mrps,
        MetricKind::Rmrps,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricKind::Mae => "MAE",
            MetricKind::Rmae => "RMAE",
            MetricKind::Mrps => "MRPS",
            MetricKind::Rmrps => "RMRPS",
            MetricKind::BiasFactor => "BIAS_FACTOR",
        }
    }

    /// Normalized by the summed actuals.
    pub fn is_relative(&self) -> bool {
        matches!(
            self,
            MetricKind::Rmae | MetricKind::Rmrps | MetricKind::BiasFactor
        )
    }

    /// Absolute counterpart of a relative error metric.
    pub fn absolute(&self) -> MetricKind {
        match self {
            MetricKind::Rmae => MetricKind::Mae,
            MetricKind::Rmrps => MetricKind::Mrps,
            other => *other,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MAE" => Ok(MetricKind::Mae),
            "RMAE" => Ok(MetricKind::Rmae),
            "MRPS" => Ok(MetricKind::Mrps),
            "RMRPS" => Ok(MetricKind::Rmrps),
            "BIAS" | "BIAS_FACTOR" => Ok(MetricKind::BiasFactor),
            other => Err(format!("unknown metric '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub kind: MetricKind,
    pub value: f64,
    pub n: usize,
    pub total_actual: u64,
    pub total_prediction: f64,
}

/// Rounds a rate to 6 significant digits; the memoization key for
/// per-rate tables.
pub fn rate_key(rate: f64) -> f64 {
    format!("{rate:.5e}").parse().unwrap_or(rate)
}

/// The predictive Poisson distribution of one forecasted rate, with the
/// quantities every per-pair metric term needs.
#[derive(Debug, Clone)]
pub struct PoissonForecast {
    rate: f64,
    median: u64,
    table: CountTable,
}

impl PoissonForecast {
    pub fn new(rate: f64, policy: &TruncationPolicy) -> Result<Self> {
        let table = crate::dist::CountDist::from(PoissonDist::new(rate)?).table(policy);
        Ok(Self {
            rate,
            median: table.median(),
            table,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn median(&self) -> u64 {
        self.median
    }

    pub fn table(&self) -> &CountTable {
        &self.table
    }

    /// `|s - median|`.
    pub fn abs_error(&self, actual: u64) -> f64 {
        actual.abs_diff(self.median) as f64
    }

    /// Ranked probability score `E|X - s| - E|X - Y| / 2`.
    pub fn rps(&self, actual: u64) -> f64 {
        (self.table.expected_abs_dev(actual) - 0.5 * self.table.expected_abs_diff_iid()).max(0.0)
    }
}

/// RPS of a Poisson forecast with the given rate, without clipping.
pub fn rps_poisson(rate: f64, actual: u64) -> Result<f64> {
    Ok(PoissonForecast::new(rate, &TruncationPolicy::default())?.rps(actual))
}

/// RPS of a deterministic forecast: the point mass has no spread, so the
/// score collapses to the absolute error.
pub fn rps_point_mass(point: f64, actual: u64) -> f64 {
    (point - actual as f64).abs()
}

/// Per-pair metric terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerms {
    pub prediction: f64,
    pub actual: u64,
    pub abs_error: f64,
    pub rps: f64,
}

/// Memoized predictive distributions keyed by rounded rate.
#[derive(Debug, Default)]
pub struct ForecastCache {
    by_rate: HashMap<u64, PoissonForecast>,
}

impl ForecastCache {
    pub fn get(&self, rate: f64) -> Option<&PoissonForecast> {
        self.by_rate.get(&rate_key(rate).to_bits())
    }

    pub fn len(&self) -> usize {
        self.by_rate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_rate.is_empty()
    }
}

/// Metric evaluation with a fixed clip floor and truncation policy.
#[derive(Debug, Clone, Copy)]
pub struct MetricEngine {
    clip: f64,
    policy: TruncationPolicy,
}

impl Default for MetricEngine {
    fn default() -> Self {
        Self {
            clip: DEFAULT_CLIP,
            policy: TruncationPolicy::default(),
        }
    }
}

impl MetricEngine {
    pub fn new(clip: f64, policy: TruncationPolicy) -> Result<Self> {
        if !clip.is_finite() || clip <= 0.0 {
            return Err(Error::InvalidSpec(format!(
                "clip floor must be positive, got {clip}"
            )));
        }
        Ok(Self { clip, policy })
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub fn policy(&self) -> &TruncationPolicy {
        &self.policy
    }

    pub fn clipped(&self, prediction: f64) -> Result<f64> {
        if !prediction.is_finite() || prediction < 0.0 {
            return Err(Error::InvalidRate(prediction));
        }
        Ok(prediction.max(self.clip))
    }

    /// Copies of `pairs` with predictions raised to the clip floor.
    pub fn clip_pairs(&self, pairs: &[PredictionPair]) -> Result<Vec<PredictionPair>> {
        pairs
            .iter()
            .map(|p| {
                Ok(PredictionPair {
                    prediction: self.clipped(p.prediction)?,
                    ..p.clone()
                })
            })
            .collect()
    }

    fn forecast(&self, prediction: f64) -> Result<PoissonForecast> {
        PoissonForecast::new(rate_key(self.clipped(prediction)?), &self.policy)
    }

    pub fn mae_term(&self, pair: &PredictionPair) -> Result<f64> {
        Ok(self.forecast(pair.prediction)?.abs_error(pair.actual))
    }

    pub fn rps(&self, pair: &PredictionPair) -> Result<f64> {
        Ok(self.forecast(pair.prediction)?.rps(pair.actual))
    }

    /// Builds one predictive table per distinct rounded rate, in parallel.
    pub fn forecast_cache<I>(&self, predictions: I) -> Result<ForecastCache>
    where
        I: IntoIterator<Item = f64>,
    {
        let mut keys = predictions
            .into_iter()
            .map(|p| Ok(rate_key(self.clipped(p)?)))
            .collect::<Result<Vec<f64>>>()?;
        keys.sort_by(f64::total_cmp);
        keys.dedup();
        let forecasts = keys
            .par_iter()
            .map(|&rate| PoissonForecast::new(rate, &self.policy))
            .collect::<Result<Vec<_>>>()?;
        Ok(ForecastCache {
            by_rate: forecasts
                .into_iter()
                .map(|f| (f.rate.to_bits(), f))
                .collect(),
        })
    }

    pub fn terms(&self, pairs: &[PredictionPair]) -> Result<Vec<PairTerms>> {
        let cache = self.forecast_cache(pairs.iter().map(|p| p.prediction))?;
        self.terms_with(pairs, &cache)
    }

    pub fn terms_with(
        &self,
        pairs: &[PredictionPair],
        cache: &ForecastCache,
    ) -> Result<Vec<PairTerms>> {
        pairs
            .iter()
            .map(|p| {
                let prediction = self.clipped(p.prediction)?;
                let forecast = match cache.get(prediction) {
                    Some(f) => f,
                    None => return Err(Error::InvalidRate(prediction)),
                };
                Ok(PairTerms {
                    prediction,
                    actual: p.actual,
                    abs_error: forecast.abs_error(p.actual),
                    rps: forecast.rps(p.actual),
                })
            })
            .collect()
    }

    pub fn aggregate(&self, pairs: &[PredictionPair], kind: MetricKind) -> Result<MetricValue> {
        aggregate_terms(&self.terms(pairs)?, kind)
    }
}

/// Aggregates precomputed per-pair terms into one metric value.
pub fn aggregate_terms(terms: &[PairTerms], kind: MetricKind) -> Result<MetricValue> {
    if terms.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = terms.len();
    let total_actual: u64 = terms.iter().map(|t| t.actual).sum();
    let total_prediction: f64 = terms.iter().map(|t| t.prediction).sum();
    let numerator: f64 = match kind {
        MetricKind::Mae | MetricKind::Rmae => terms.iter().map(|t| t.abs_error).sum(),
        MetricKind::Mrps | MetricKind::Rmrps => terms.iter().map(|t| t.rps).sum(),
        MetricKind::BiasFactor => total_prediction,
    };
    let value = if kind.is_relative() {
        if total_actual == 0 {
            return Err(Error::ZeroActualTotal(kind));
        }
        numerator / total_actual as f64
    } else {
        numerator / n as f64
    };
    Ok(MetricValue {
        kind,
        value,
        n,
        total_actual,
        total_prediction,
    })
}
