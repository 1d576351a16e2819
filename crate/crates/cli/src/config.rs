//! Run configuration: TOML file, then command-line overrides, then
//! validation into a [`RatingConfig`].

use std::path::{Path, PathBuf};

use countrate::reference::{DEFAULT_BIAS_FACTORS, DEFAULT_GAMMA, DEFAULT_VARIANCES_AT_10};
use countrate::{
    GradeLadder, MetricKind, RatingConfig, ReferenceMode, SubPoissonPolicy, TruncationPolicy,
    DEFAULT_CLIP, DEFAULT_N_BINS,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MAX_N_BINS: u32 = 100;

/// How sub-Poissonian buckets are scored: `"flag"` or a score in [0, 100].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SubPoissonSetting {
    Keyword(SubPoissonKeyword),
    Critical(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubPoissonKeyword {
    Flag,
}

impl std::str::FromStr for SubPoissonSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("flag") {
            return Ok(Self::Keyword(SubPoissonKeyword::Flag));
        }
        s.parse::<f64>()
            .map(Self::Critical)
            .map_err(|_| format!("expected \"flag\" or a score, got {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub variances_at_10: [f64; 7],
    pub bias_factors: [f64; 7],
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            variances_at_10: DEFAULT_VARIANCES_AT_10,
            bias_factors: DEFAULT_BIAS_FACTORS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceModeSetting {
    PerPair,
    BucketCenter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Buckets per decade, 1..=100.
    pub n_bins: u32,
    /// Overdispersion exponent, (0, 4].
    pub gamma: f64,
    /// Prediction floor, (0, 1].
    pub clip: f64,
    /// Bias factors are drawn within [1/c, c] in plots; c > 1.
    pub bias_plot_clip: f64,
    pub ladder: LadderConfig,
    pub sub_poissonian: SubPoissonSetting,
    /// Zero-sales buckets with less predicted volume are left unrated; >= 0.
    pub low_evidence_threshold: f64,
    pub reference_mode: ReferenceModeSetting,
    pub noise_metric: MetricKind,
    pub metrics: Vec<MetricKind>,
    pub group_by: Vec<String>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_bins: DEFAULT_N_BINS,
            gamma: DEFAULT_GAMMA,
            clip: DEFAULT_CLIP,
            bias_plot_clip: 10.0,
            ladder: LadderConfig::default(),
            sub_poissonian: SubPoissonSetting::Keyword(SubPoissonKeyword::Flag),
            low_evidence_threshold: 5.0,
            reference_mode: ReferenceModeSetting::PerPair,
            noise_metric: MetricKind::Rmrps,
            metrics: MetricKind::ERROR_KINDS.to_vec(),
            group_by: Vec::new(),
            output_dir: PathBuf::from("."),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn ladder(&self) -> Result<GradeLadder, CliError> {
        GradeLadder::new(
            self.ladder.variances_at_10,
            self.ladder.bias_factors,
            self.gamma,
        )
        .map_err(CliError::from)
    }

    pub fn validate(&self) -> Result<RatingConfig, CliError> {
        let bad = |msg: String| Err(CliError::config(msg));
        if !(1..=MAX_N_BINS).contains(&self.n_bins) {
            return bad(format!("n_bins must lie in 1..={MAX_N_BINS}, got {}", self.n_bins));
        }
        if !(self.gamma > 0.0 && self.gamma <= 4.0) {
            return bad(format!("gamma must lie in (0, 4], got {}", self.gamma));
        }
        if !(self.clip > 0.0 && self.clip <= 1.0) {
            return bad(format!("clip must lie in (0, 1], got {}", self.clip));
        }
        if !(self.bias_plot_clip > 1.0 && self.bias_plot_clip.is_finite()) {
            return bad(format!("bias_plot_clip must exceed 1, got {}", self.bias_plot_clip));
        }
        if !(self.low_evidence_threshold >= 0.0 && self.low_evidence_threshold.is_finite()) {
            return bad("low_evidence_threshold must be >= 0".into());
        }
        if self.metrics.is_empty() {
            return bad("at least one metric is required".into());
        }
        if self.metrics.contains(&MetricKind::BiasFactor) || self.noise_metric == MetricKind::BiasFactor {
            return bad("the bias factor is rated separately; list error metrics only".into());
        }
        let sub_poisson = match self.sub_poissonian {
            SubPoissonSetting::Keyword(SubPoissonKeyword::Flag) => SubPoissonPolicy::FlagOnly,
            SubPoissonSetting::Critical(s) if (0.0..=100.0).contains(&s) => {
                SubPoissonPolicy::CriticalScore(s)
            }
            SubPoissonSetting::Critical(s) => {
                return bad(format!("sub_poissonian score must lie in [0, 100], got {s}"))
            }
        };
        let mut metrics = self.metrics.clone();
        metrics.sort();
        metrics.dedup();
        Ok(RatingConfig {
            n_bins: self.n_bins,
            clip: self.clip,
            ladder: self.ladder()?,
            noise_metric: self.noise_metric,
            metrics,
            sub_poisson,
            low_evidence_threshold: self.low_evidence_threshold,
            reference_mode: match self.reference_mode {
                ReferenceModeSetting::PerPair => ReferenceMode::PerPair,
                ReferenceModeSetting::BucketCenter => ReferenceMode::BucketCenter,
            },
            tail_tolerance: TruncationPolicy::default().tail_tolerance(),
        })
    }
}
