//! Logarithmic bucketing of pairs by predicted rate.
//!
//! A pair with prediction `r` lands in the bucket
//! `R = round(n_bins * log10(r)) / n_bins`, so each decade holds `n_bins`
//! buckets. Buckets are keyed by predictions only, never by outcomes.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PredictionPair;

/// Default number of buckets per decade.
pub const DEFAULT_N_BINS: u32 = 4;

/// Rounded log10 rate, stored exactly as `R * n_bins`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BucketKey {
    index: i64,
    n_bins: u32,
}

impl BucketKey {
    pub fn new(index: i64, n_bins: u32) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::InvalidBinCount);
        }
        Ok(Self { index, n_bins })
    }

    /// `R * n_bins`.
    pub fn index(&self) -> i64 {
        self.index
    }

    pub fn n_bins(&self) -> u32 {
        self.n_bins
    }

    /// `R`.
    pub fn log_rate(&self) -> f64 {
        self.index as f64 / self.n_bins as f64
    }

    /// Geometric bucket center `10^R`.
    pub fn center_rate(&self) -> f64 {
        10f64.powf(self.log_rate())
    }
}

impl fmt::Display for BucketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.log_rate())
    }
}

pub fn bucket_key(prediction: f64, n_bins: u32) -> Result<BucketKey> {
    if n_bins == 0 {
        return Err(Error::InvalidBinCount);
    }
    if !prediction.is_finite() || prediction <= 0.0 {
        return Err(Error::NonPositivePrediction(prediction));
    }
    // f64::round rounds half away from zero
    let index = (n_bins as f64 * prediction.log10()).round() as i64;
    Ok(BucketKey { index, n_bins })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bucket {
    pub key: BucketKey,
    pub pairs: Vec<PredictionPair>,
    pub total_prediction: f64,
    pub total_actual: u64,
    pub center_rate: f64,
}

impl Bucket {
    fn empty(key: BucketKey) -> Self {
        Self {
            key,
            pairs: Vec::new(),
            total_prediction: 0.0,
            total_actual: 0,
            center_rate: key.center_rate(),
        }
    }

    fn push(&mut self, pair: PredictionPair) {
        self.total_prediction += pair.prediction;
        self.total_actual += pair.actual;
        self.pairs.push(pair);
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Splits already-clipped pairs into buckets sorted by `R`. Pairs keep their
/// input order within each bucket.
pub fn partition(pairs: &[PredictionPair], n_bins: u32) -> Result<Vec<Bucket>> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut buckets: BTreeMap<BucketKey, Bucket> = BTreeMap::new();
    for pair in pairs {
        let key = bucket_key(pair.prediction, n_bins)?;
        buckets
            .entry(key)
            .or_insert_with(|| Bucket::empty(key))
            .push(pair.clone());
    }
    Ok(buckets.into_values().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decade_keys() {
        for n in [1, 2, 4, 10] {
            assert_eq!(bucket_key(10.0, n).unwrap().log_rate(), 1.0);
        }
        assert_eq!(bucket_key(0.01, 4).unwrap().log_rate(), -2.0);
    }

    #[test]
    fn half_decade_key() {
        // 2 * log10(3.17) = 1.0023 rounds to 1
        let key = bucket_key(3.17, 2).unwrap();
        assert_eq!(key.index(), 1);
        assert_eq!(key.log_rate(), 0.5);
    }

    #[test]
    fn ties_round_away_from_zero() {
        // log10(sqrt(10)) is exactly 0.5 in f64
        let half = 10f64.sqrt();
        assert_eq!(half.log10(), 0.5);
        assert_eq!(bucket_key(half, 1).unwrap().index(), 1);
        assert_eq!(bucket_key(1.0 / half, 1).unwrap().index(), -1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            bucket_key(0.0, 4),
            Err(Error::NonPositivePrediction(_))
        ));
        assert!(matches!(bucket_key(1.0, 0), Err(Error::InvalidBinCount)));
        assert!(matches!(partition(&[], 4), Err(Error::EmptyInput)));
    }

    #[test]
    fn single_bucket() {
        let pairs: Vec<_> = (0..5)
            .map(|i| PredictionPair::new(format!("{i}"), 10.0, i))
            .collect();
        let buckets = partition(&pairs, 4).unwrap();
        assert_eq!(buckets.len(), 1);
        assert_eq!(buckets[0].key.log_rate(), 1.0);
        assert_eq!(buckets[0].total_actual, 10);
        assert_eq!(buckets[0].total_prediction, 50.0);
        assert_eq!(buckets[0].center_rate, 10.0);
    }

    #[test]
    fn mixed_decades() {
        let pairs = vec![
            PredictionPair::new("a", 10.0, 1),
            PredictionPair::new("b", 0.1, 0),
            PredictionPair::new("c", 1.0, 2),
        ];
        let buckets = partition(&pairs, 1).unwrap();
        let keys: Vec<f64> = buckets.iter().map(|b| b.key.log_rate()).collect();
        assert_eq!(keys, vec![-1.0, 0.0, 1.0]);
    }
}
