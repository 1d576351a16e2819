//! Rating of count forecasts that accounts for Poisson noise.
//!
//! Pairs of (predicted rate, observed count) are grouped into logarithmic
//! buckets of the predicted rate. Within each bucket the achieved error is
//! compared with the error a forecaster of each grade would be expected to
//! reach, and the position on that ladder becomes a score between 0 and 100.
//!
//! ```
//! use countrate::{PredictionPair, Rater, RatingConfig};
//!
//! let pairs: Vec<PredictionPair> = (0..400)
//!     .map(|i| PredictionPair::new(format!("p{i}"), 2.0, (i % 5) as u64))
//!     .collect();
//! let rating = Rater::new(RatingConfig::default())?.rate(&pairs)?;
//! let score = rating.overall.noise_score.unwrap();
//! assert!((0.0..=100.0).contains(&score));
//! # Ok::<(), countrate::Error>(())
//! ```

pub mod bucketing;
pub mod datagen;
pub mod dist;
mod error;
pub mod metrics;
pub mod rating;
pub mod reference;
pub mod special;

pub use bucketing::{bucket_key, partition, Bucket, BucketKey, DEFAULT_N_BINS};
pub use dist::{CountDist, CountTable, NegBinDist, PoissonDist, TruncationPolicy};
pub use error::{Error, Result};
pub use metrics::{MetricEngine, MetricKind, MetricValue, PredictionPair, DEFAULT_CLIP};
pub use rating::{
    grade_label, BucketFlag, BucketRating, GroupRating, OverallRating, Rater, RatingConfig,
    SubPoissonPolicy,
};
pub use reference::{Grade, GradeLadder, GradeValues, ReferenceEngine, ReferenceMode};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/distributions.md")]
    pub struct Distributions;
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub struct Metrics;
    #[doc = include_str!("../../../book/src/buckets.md")]
    pub struct Buckets;
    #[doc = include_str!("../../../book/src/ladder.md")]
    pub struct Ladder;
    #[doc = include_str!("../../../book/src/scores.md")]
    pub struct Scores;
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub struct Simulation;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
}
