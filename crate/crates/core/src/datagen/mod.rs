//! Synthetic portfolios with known rates and the two heuristic forecast
//! models (previous-day and trailing weekday average).
//!
//! Every series draws from its own ChaCha stream derived from the spec seed
//! and the series index, so output is independent of thread count.

mod m5;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PredictionPair;
use crate::reference::{Grade, GradeLadder};

pub use m5::{load_m5, DateRange, M5_VALIDATION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RateLaw {
    Fixed(f64),
    /// log10 of the rate uniform between the bounds.
    LogUniform { low: f64, high: f64 },
    /// One rate per series, cycled if shorter than `n_series`.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub seed: u64,
    pub n_series: usize,
    pub rate_law: RateLaw,
    /// Overdispersed actuals following this grade; `None` means Poisson.
    pub grade: Option<Grade>,
    /// Multiplies the true rate to form the prediction.
    pub bias_multiplier: f64,
}

impl GenSpec {
    pub fn poisson(seed: u64, n_series: usize, rate_law: RateLaw) -> Self {
        Self {
            seed,
            n_series,
            rate_law,
            grade: None,
            bias_multiplier: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n_series == 0 {
            return bad("n_series must be positive".into());
        }
        if !(self.bias_multiplier.is_finite() && self.bias_multiplier > 0.0) {
            return bad(format!("bias multiplier must be positive, got {}", self.bias_multiplier));
        }
        let ok_rate = |r: f64| r.is_finite() && r > 0.0 && r <= crate::dist::MAX_RATE;
        match &self.rate_law {
            RateLaw::Fixed(r) if !ok_rate(*r) => bad(format!("invalid rate {r}")),
            RateLaw::LogUniform { low, high } if !(ok_rate(*low) && ok_rate(*high) && low <= high) => {
                bad(format!("invalid rate bounds [{low}, {high}]"))
            }
            RateLaw::Explicit(v) if v.is_empty() || !v.iter().all(|r| ok_rate(*r)) => {
                bad("explicit rates must be a non-empty list of positive rates".into())
            }
            _ => Ok(()),
        }
    }
}

/// Independent stream for series `index`.
fn series_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn draw_rate(law: &RateLaw, index: usize, rng: &mut ChaCha8Rng) -> f64 {
    match law {
        RateLaw::Fixed(r) => *r,
        RateLaw::LogUniform { low, high } => {
            let (a, b) = (low.log10(), high.log10());
            10f64.powf(a + (b - a) * rng.random::<f64>())
        }
        RateLaw::Explicit(v) => v[index % v.len()],
    }
}

fn poisson_draw(rate: f64, rng: &mut ChaCha8Rng) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("finite positive rate").sample(rng) as u64
}

/// Gamma-Poisson draw with mean `mu` and variance `variance > mu`.
fn mixture_draw(mu: f64, variance: f64, rng: &mut ChaCha8Rng) -> u64 {
    let rate_variance = variance - mu;
    if rate_variance <= 0.0 {
        return poisson_draw(mu, rng);
    }
    let shape = mu * mu / rate_variance;
    let scale = rate_variance / mu;
    let rate: f64 = Gamma::new(shape, scale).expect("positive gamma parameters").sample(rng);
    poisson_draw(rate, rng)
}

/// Draws one actual for rate `mu` under the grade (Poisson when `None`).
fn draw_actual(mu: f64, grade: Option<Grade>, ladder: &GradeLadder, rng: &mut ChaCha8Rng) -> u64 {
    match grade {
        None | Some(Grade::Perfect) => poisson_draw(mu, rng),
        Some(g) => mixture_draw(mu, ladder.grade_variance(g, mu), rng),
    }
}

/// True rates of all series.
pub fn true_rates(spec: &GenSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    Ok((0..spec.n_series)
        .into_par_iter()
        .map(|i| draw_rate(&spec.rate_law, i, &mut series_rng(spec.seed, i as u64)))
        .collect())
}

fn gen_pairs(spec: &GenSpec, ladder: &GradeLadder) -> Result<Vec<PredictionPair>> {
    spec.validate()?;
    Ok((0..spec.n_series)
        .into_par_iter()
        .map(|i| {
            let mut rng = series_rng(spec.seed, i as u64);
            let rate = draw_rate(&spec.rate_law, i, &mut rng);
            let actual = draw_actual(rate, spec.grade, ladder, &mut rng);
            PredictionPair::new(format!("s{i}"), rate * spec.bias_multiplier, actual)
        })
        .collect())
}

/// Pairs whose predictions are the true rates (times the bias multiplier)
/// and whose actuals are Poisson draws from the true rates.
pub fn gen_poisson_pairs(spec: &GenSpec) -> Result<Vec<PredictionPair>> {
    if matches!(spec.grade, Some(g) if g != Grade::Perfect) {
        return Err(Error::InvalidSpec(
            "Poisson pairs cannot carry an overdispersed grade".into(),
        ));
    }
    gen_pairs(spec, &GradeLadder::default())
}

/// Pairs whose actuals follow the gamma-Poisson mixture of the spec's grade.
pub fn gen_graded_pairs(spec: &GenSpec, ladder: &GradeLadder) -> Result<Vec<PredictionPair>> {
    match spec.grade {
        None | Some(Grade::Perfect) => gen_poisson_pairs(spec),
        Some(_) => gen_pairs(spec, ladder),
    }
}

/// Daily counts for a set of series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPanel {
    pub ids: Vec<String>,
    pub groups: Vec<BTreeMap<String, String>>,
    /// `counts[series][day]`.
    pub counts: Vec<Vec<u32>>,
    /// Weekday index (0..7) per day; `day % 7` when absent.
    pub weekdays: Option<Vec<u8>>,
    /// ISO date per day, when known.
    pub dates: Option<Vec<String>>,
}

impl SeriesPanel {
    pub fn n_series(&self) -> usize {
        self.counts.len()
    }

    pub fn n_days(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn weekday(&self, day: usize) -> u8 {
        match &self.weekdays {
            Some(w) => w[day],
            None => (day % 7) as u8,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts
            .iter()
            .flat_map(|c| c.iter())
            .map(|&c| c as u64)
            .sum()
    }

    /// Days `[from, to)`.
    pub fn slice_days(&self, from: usize, to: usize) -> Result<SeriesPanel> {
        if from > to || to > self.n_days() {
            return Err(Error::InvalidSpec(format!(
                "day range {from}..{to} outside 0..{}",
                self.n_days()
            )));
        }
        Ok(SeriesPanel {
            ids: self.ids.clone(),
            groups: self.groups.clone(),
            counts: self.counts.iter().map(|c| c[from..to].to_vec()).collect(),
            weekdays: self.weekdays.as_ref().map(|w| w[from..to].to_vec()),
            dates: self.dates.as_ref().map(|d| d[from..to].to_vec()),
        })
    }

    /// Series whose group label `name` equals `value`.
    pub fn filter_group(&self, name: &str, value: &str) -> SeriesPanel {
        let keep: Vec<usize> = (0..self.n_series())
            .filter(|&i| self.groups[i].get(name).map(String::as_str) == Some(value))
            .collect();
        SeriesPanel {
            ids: keep.iter().map(|&i| self.ids[i].clone()).collect(),
            groups: keep.iter().map(|&i| self.groups[i].clone()).collect(),
            counts: keep.iter().map(|&i| self.counts[i].clone()).collect(),
            weekdays: self.weekdays.clone(),
            dates: self.dates.clone(),
        }
    }

    /// Pairs for days `from..` with a fixed per-series prediction source.
    fn pairs_for(&self, day: usize, series: usize, prediction: f64) -> PredictionPair {
        PredictionPair {
            id: format!("{}:{day}", self.ids[series]),
            prediction,
            actual: self.counts[series][day] as u64,
            groups: self.groups[series].clone(),
        }
    }
}

/// A simulated panel together with the rates that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPanel {
    pub panel: SeriesPanel,
    /// `rates[series][day]`.
    pub rates: Vec<Vec<f64>>,
}

impl SimulatedPanel {
    /// The known-rate benchmark: predict every day from `from` on with its
    /// true rate (times `bias_multiplier`).
    pub fn oracle_pairs(&self, from: usize, bias_multiplier: f64) -> Vec<PredictionPair> {
        let mut out = Vec::new();
        for s in 0..self.panel.n_series() {
            for day in from..self.panel.n_days() {
                out.push(self.panel.pairs_for(day, s, self.rates[s][day] * bias_multiplier));
            }
        }
        out
    }
}

/// Stationary panel: each series keeps its drawn rate, optionally
/// modulated by a weekday profile (multipliers for weekdays 0..7).
pub fn gen_panel(
    spec: &GenSpec,
    days: usize,
    weekday_profile: Option<[f64; 7]>,
    ladder: &GradeLadder,
) -> Result<SimulatedPanel> {
    spec.validate()?;
    if days == 0 {
        return Err(Error::InvalidSpec("panel needs at least one day".into()));
    }
    if let Some(profile) = weekday_profile {
        if !profile.iter().all(|m| m.is_finite() && *m > 0.0) {
            return Err(Error::InvalidSpec("weekday multipliers must be positive".into()));
        }
    }
    let series: Vec<(Vec<f64>, Vec<u32>)> = (0..spec.n_series)
        .into_par_iter()
        .map(|i| {
            let mut rng = series_rng(spec.seed, i as u64);
            let base = draw_rate(&spec.rate_law, i, &mut rng);
            let rates: Vec<f64> = (0..days)
                .map(|d| base * weekday_profile.map_or(1.0, |p| p[d % 7]))
                .collect();
            let counts = rates
                .iter()
                .map(|&r| draw_actual(r, spec.grade, ladder, &mut rng) as u32)
                .collect();
            (rates, counts)
        })
        .collect();
    let (rates, counts) = series.into_iter().unzip();
    Ok(SimulatedPanel {
        panel: SeriesPanel {
            ids: (0..spec.n_series).map(|i| format!("s{i}")).collect(),
            groups: vec![BTreeMap::new(); spec.n_series],
            counts,
            weekdays: None,
            dates: None,
        },
        rates,
    })
}

/// Yesterday's count as today's prediction, for every day with a
/// predecessor. Zero predictions are left for the clip floor.
pub fn naive_one_day_model(panel: &SeriesPanel) -> Vec<PredictionPair> {
    let mut out = Vec::with_capacity(panel.n_series() * panel.n_days().saturating_sub(1));
    for s in 0..panel.n_series() {
        for day in 1..panel.n_days() {
            out.push(panel.pairs_for(day, s, panel.counts[s][day - 1] as f64));
        }
    }
    out
}

/// Trailing 28-day weekday average: the forecast origin sits
/// `horizon_days` before the panel end, and each of the last `horizon_days`
/// days is predicted by the mean of the four same-weekday counts in the 28
/// days before the origin.
pub fn simple_28_day_model(panel: &SeriesPanel, horizon_days: usize) -> Result<Vec<PredictionPair>> {
    if horizon_days == 0 || horizon_days > 28 {
        return Err(Error::InvalidSpec(format!(
            "horizon must lie in 1..=28, got {horizon_days}"
        )));
    }
    let needed = 28 + horizon_days;
    if panel.n_days() < needed {
        return Err(Error::InsufficientHistory {
            needed,
            available: panel.n_days(),
        });
    }
    let origin = panel.n_days() - horizon_days;
    let window = origin - 28..origin;
    let mut out = Vec::with_capacity(panel.n_series() * horizon_days);
    for s in 0..panel.n_series() {
        let mut sums = [0u64; 7];
        let mut counts = [0u32; 7];
        for day in window.clone() {
            let w = panel.weekday(day) as usize % 7;
            sums[w] += panel.counts[s][day] as u64;
            counts[w] += 1;
        }
        for day in origin..panel.n_days() {
            let w = panel.weekday(day) as usize % 7;
            let prediction = if counts[w] == 0 {
                0.0
            } else {
                sums[w] as f64 / counts[w] as f64
            };
            out.push(panel.pairs_for(day, s, prediction));
        }
    }
    Ok(out)
}
