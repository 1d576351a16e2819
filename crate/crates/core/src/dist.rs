//! Poisson and mean/variance-parametrized negative binomial distributions.
//!
//! Every expectation the metrics and references need reduces to sums over a
//! truncated support. [`CountTable`] materializes that support once (pmf,
//! cdf, survival function, partial first moment) so that per-observation
//! queries such as `E|X - s|` cost O(1).

use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_rising};

/// Largest rate accepted by the distribution constructors.
pub const MAX_RATE: f64 = 1e5;

/// How far the support of a count distribution is summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    tail_tolerance: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            tail_tolerance: 1e-12,
        }
    }
}

impl TruncationPolicy {
    pub fn new(tail_tolerance: f64) -> Result<Self> {
        if !(tail_tolerance > 0.0 && tail_tolerance < 1e-6) {
            return Err(Error::InvalidSpec(format!(
                "tail tolerance must lie in (0, 1e-6), got {tail_tolerance}"
            )));
        }
        Ok(Self { tail_tolerance })
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance
    }

    /// Initial summation bound `ceil(mean + 12 sd + 30)`. Tables extend past
    /// it until the remaining tail mass is provably below the tolerance.
    pub fn hard_cap(&self, mean: f64, variance: f64) -> usize {
        (mean + 12.0 * variance.sqrt() + 30.0).ceil() as usize
    }
}

fn check_rate(mu: f64) -> Result<()> {
    if !mu.is_finite() || mu <= 0.0 {
        return Err(Error::InvalidRate(mu));
    }
    if mu > MAX_RATE {
        return Err(Error::RateOutOfRange(mu));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonDist {
    mu: f64,
}

impl PoissonDist {
    pub fn new(mu: f64) -> Result<Self> {
        check_rate(mu)?;
        Ok(Self { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

/// Negative binomial with prescribed mean and variance (variance > mean),
/// i.e. a Poisson whose rate is gamma distributed with variance
/// `variance - mean`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegBinDist {
    mu: f64,
    variance: f64,
    shape: f64,
    success_prob: f64,
    ln_p: f64,
    ln_q: f64,
    q: f64,
}

impl NegBinDist {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Gamma shape `mu^2 / (variance - mu)`.
    pub fn shape(&self) -> f64 {
        self.shape
    }

    /// Success probability `mu / variance`.
    pub fn success_prob(&self) -> f64 {
        self.success_prob
    }
}

/// Builds the negative binomial with mean `mu` and the given variance.
pub fn nb_from_mean_variance(mu: f64, variance: f64) -> Result<NegBinDist> {
    check_rate(mu)?;
    if !variance.is_finite() || variance <= mu {
        return Err(Error::DegenerateDispersion { mu, variance });
    }
    let excess = variance - mu;
    let shape = mu * mu / excess;
    if !shape.is_finite() || shape <= 0.0 {
        return Err(Error::DegenerateDispersion { mu, variance });
    }
    Ok(NegBinDist {
        mu,
        variance,
        shape,
        success_prob: mu / variance,
        ln_p: -(excess / mu).ln_1p(),
        ln_q: (excess / variance).ln(),
        q: excess / variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountDist {
    Poisson(PoissonDist),
    NegBin(NegBinDist),
}

impl From<PoissonDist> for CountDist {
    fn from(d: PoissonDist) -> Self {
        CountDist::Poisson(d)
    }
}

impl From<NegBinDist> for CountDist {
    fn from(d: NegBinDist) -> Self {
        CountDist::NegBin(d)
    }
}

impl CountDist {
    /// Poisson when `variance == mu`, negative binomial when larger.
    pub fn with_moments(mu: f64, variance: f64) -> Result<Self> {
        if variance == mu {
            Ok(PoissonDist::new(mu)?.into())
        } else {
            Ok(nb_from_mean_variance(mu, variance)?.into())
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            CountDist::Poisson(d) => d.mu,
            CountDist::NegBin(d) => d.mu,
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            CountDist::Poisson(d) => d.mu,
            CountDist::NegBin(d) => d.variance,
        }
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        let kf = k as f64;
        match self {
            CountDist::Poisson(d) => kf * d.mu.ln() - d.mu - ln_factorial(k),
            CountDist::NegBin(d) => {
                ln_rising(d.shape, k) - ln_factorial(k) + d.shape * d.ln_p + kf * d.ln_q
            }
        }
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.ln_pmf(k).exp()
    }

    /// `P(X <= k)`, using the default truncation policy.
    pub fn cdf(&self, k: u64) -> f64 {
        self.table(&TruncationPolicy::default()).cdf(k)
    }

    /// Smallest `m` with `P(X <= m) >= 1/2`.
    pub fn median(&self) -> u64 {
        self.table(&TruncationPolicy::default()).median()
    }

    /// `E|X - s|`.
    pub fn expected_abs_dev(&self, s: u64) -> f64 {
        self.table(&TruncationPolicy::default()).expected_abs_dev(s)
    }

    /// `E|X - Y|` for independent copies X, Y.
    pub fn expected_abs_diff_iid(&self) -> f64 {
        self.table(&TruncationPolicy::default()).expected_abs_diff_iid()
    }

    /// `pmf(k + 1) / pmf(k)`.
    fn ratio(&self, k: usize) -> f64 {
        let kf = k as f64;
        match self {
            CountDist::Poisson(d) => d.mu / (kf + 1.0),
            CountDist::NegBin(d) => (kf + d.shape) / (kf + 1.0) * d.q,
        }
    }

    /// Upper bound on `pmf(j + 1) / pmf(j)` for all `j >= k`.
    fn ratio_sup_from(&self, k: usize) -> f64 {
        match self {
            CountDist::Poisson(_) => self.ratio(k),
            CountDist::NegBin(d) if d.shape >= 1.0 => self.ratio(k),
            CountDist::NegBin(d) => self.ratio(k).max(d.q),
        }
    }

    /// Materializes the truncated support.
    pub fn table(&self, policy: &TruncationPolicy) -> CountTable {
        let mean = self.mean();
        let variance = self.variance();
        let mut len = policy.hard_cap(mean, variance) + 1;
        let anchor = (mean.floor() as usize).min(len - 1);

        let mut pmf = vec![0.0; len];
        pmf[anchor] = self.ln_pmf(anchor as u64).exp();
        for k in (0..anchor).rev() {
            pmf[k] = pmf[k + 1] / self.ratio(k);
        }
        for k in anchor + 1..len {
            pmf[k] = pmf[k - 1] * self.ratio(k - 1);
        }

        // extend until the geometric tail bound drops below the tolerance
        loop {
            let last = len - 1;
            let rho = self.ratio_sup_from(last);
            let bound = if rho < 1.0 {
                pmf[last] * rho / (1.0 - rho)
            } else {
                f64::INFINITY
            };
            if bound < policy.tail_tolerance() {
                break;
            }
            let extra = (len / 2).max(32);
            pmf.reserve(extra);
            for k in len..len + extra {
                let next = pmf[k - 1] * self.ratio(k - 1);
                pmf.push(next);
            }
            len = pmf.len();
        }

        // All entries share the anchor's rounding error (about 1e-11
        // relative near 1e4), so dividing by the sum cancels it. The
        // truncated tail is below the tolerance either way.
        let total: f64 = pmf.iter().sum();
        for p in &mut pmf {
            *p /= total;
        }

        CountTable::from_pmf(pmf, mean, variance)
    }
}

/// Truncated support of a count distribution with cumulative helpers.
#[derive(Debug, Clone)]
pub struct CountTable {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    sf: Vec<f64>,
    partial_mean: Vec<f64>,
    mean: f64,
    variance: f64,
    abs_diff_iid: f64,
}

impl CountTable {
    fn from_pmf(pmf: Vec<f64>, mean: f64, variance: f64) -> Self {
        let n = pmf.len();
        let mut cdf = Vec::with_capacity(n);
        let mut partial_mean = Vec::with_capacity(n);
        let (mut c, mut m) = (0.0, 0.0);
        for (k, p) in pmf.iter().enumerate() {
            c += p;
            m += k as f64 * p;
            cdf.push(c);
            partial_mean.push(m);
        }
        let mut sf = vec![0.0; n];
        for k in (0..n.saturating_sub(1)).rev() {
            sf[k] = sf[k + 1] + pmf[k + 1];
        }
        let abs_diff_iid = 2.0 * cdf.iter().zip(&sf).map(|(f, s)| f * s).sum::<f64>();
        Self {
            pmf,
            cdf,
            sf,
            partial_mean,
            mean,
            variance,
            abs_diff_iid,
        }
    }

    /// Number of support points held (`0..len`).
    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn pmf_slice(&self) -> &[f64] {
        &self.pmf
    }

    pub fn pmf(&self, k: u64) -> f64 {
        self.pmf.get(k as usize).copied().unwrap_or(0.0)
    }

    pub fn cdf(&self, k: u64) -> f64 {
        match self.cdf.get(k as usize) {
            Some(c) => *c,
            None => *self.cdf.last().unwrap_or(&1.0),
        }
    }

    /// `P(X > k)`.
    pub fn sf(&self, k: u64) -> f64 {
        self.sf.get(k as usize).copied().unwrap_or(0.0)
    }

    pub fn median(&self) -> u64 {
        self.cdf.partition_point(|&c| c < 0.5) as u64
    }

    /// `E|X - s|` via `E[X] - s + 2 * sum_{x <= s} (s - x) pmf(x)`.
    pub fn expected_abs_dev(&self, s: u64) -> f64 {
        let idx = (s as usize).min(self.len() - 1);
        let sf = s as f64;
        self.mean - sf + 2.0 * (sf * self.cdf[idx] - self.partial_mean[idx])
    }

    pub fn expected_abs_diff_iid(&self) -> f64 {
        self.abs_diff_iid
    }
}

/// `E|X - S|` for independent `X ~ a`, `S ~ b`.
pub fn expected_abs_diff(a: &CountTable, b: &CountTable) -> f64 {
    let n = a.len().max(b.len());
    (0..n as u64)
        .map(|k| a.cdf(k) * b.sf(k) + b.cdf(k) * a.sf(k))
        .sum()
}
