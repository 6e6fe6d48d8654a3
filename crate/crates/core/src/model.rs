//! Declarative queue description: arrival rate pattern, batch-size law,
//! service law and initial state.
//!
//! A [`QueueSpec`] round-trips through JSON:
//!
//! ```json
//! {
//!   "rate": { "base": 2.0, "cos": [1.0], "sin": [0.0] },
//!   "batch": { "kind": "empirical", "pmf": [[1, 0.5], [2, 0.5]] },
//!   "service": { "kind": "exponential", "mu": 1.0 },
//!   "q0": 0
//! }
//! ```
//!
//! Batch kinds: `fixed {n}`, `empirical {pmf: [[size, prob], ...]}`,
//! `divisible_sum {base: [[size, prob], ...], n}`.
//! Service kinds: `exponential {mu}`, `deterministic {d}`, `uniform {b}`,
//! `empirical {samples}`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability sums must hit 1 within this tolerance.
pub const PMF_SUM_TOL: f64 = 1e-12;
/// Resampled tuples used for empirical order-statistic means.
pub const ORDER_STAT_MC_TUPLES: usize = 1_000_000;
/// Seed for empirical order-statistic resampling.
pub const ORDER_STAT_MC_SEED: u64 = 0x0bd5_7a75;

/// Arrival intensity `λ(t) = base + Σ_k a_k cos(kt) + b_k sin(kt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRate")]
pub struct RatePattern {
    base: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

#[derive(Deserialize)]
struct RawRate {
    base: f64,
    #[serde(default)]
    cos: Vec<f64>,
    #[serde(default)]
    sin: Vec<f64>,
}

impl TryFrom<RawRate> for RatePattern {
    type Error = Error;
    fn try_from(raw: RawRate) -> Result<Self> {
        RatePattern::new(raw.base, raw.cos, raw.sin)
    }
}

impl RatePattern {
    /// Builds a pattern; the shorter coefficient list is padded with zeros.
    ///
    /// Rejects patterns whose ℓ1 bound `base - Σ(|a_k| + |b_k|)` is not
    /// strictly positive, even if the pattern never actually reaches zero.
    pub fn new(base: f64, mut cos: Vec<f64>, mut sin: Vec<f64>) -> Result<Self> {
        if !(base > 0.0) || !base.is_finite() {
            return Err(Error::InvalidModel(format!("rate base must be > 0, got {base}")));
        }
        if cos.iter().chain(sin.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidModel("rate coefficients must be finite".into()));
        }
        let k = cos.len().max(sin.len());
        cos.resize(k, 0.0);
        sin.resize(k, 0.0);
        let swing: f64 = cos.iter().chain(sin.iter()).map(|c| c.abs()).sum();
        if base - swing <= 0.0 {
            return Err(Error::InvalidModel(format!(
                "rate pattern not provably positive: base {base} <= coefficient mass {swing}"
            )));
        }
        Ok(Self { base, cos, sin })
    }

    pub fn stationary(base: f64) -> Result<Self> {
        Self::new(base, Vec::new(), Vec::new())
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn cos_coeffs(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coeffs(&self) -> &[f64] {
        &self.sin
    }

    /// Fourier truncation order K.
    pub fn order(&self) -> usize {
        self.cos.len()
    }

    pub fn is_stationary(&self) -> bool {
        self.cos.iter().chain(self.sin.iter()).all(|&c| c == 0.0)
    }

    /// Iterator over `(k, a_k, b_k)` with `k` starting at 1.
    pub fn harmonics(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .map(|(i, (&a, &b))| ((i + 1) as f64, a, b))
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        self.base
            + self
                .harmonics()
                .map(|(k, a, b)| a * (k * t).cos() + b * (k * t).sin())
                .sum::<f64>()
    }

    /// ℓ1 envelope `base + Σ(|a_k| + |b_k|)`, an upper bound on `rate_at`.
    pub fn rate_bound(&self) -> f64 {
        self.base + self.cos.iter().chain(self.sin.iter()).map(|c| c.abs()).sum::<f64>()
    }

    /// `e^{-ct} ∫_0^t λ(s) e^{cs} ds` in closed form, for decay rate `c > 0`.
    pub fn discounted_integral(&self, c: f64, t: f64) -> f64 {
        let decay = (-c * t).exp();
        let mut acc = self.base * (-(-c * t).exp_m1()) / c;
        for (k, a, b) in self.harmonics() {
            let (s, co) = (k * t).sin_cos();
            let denom = k * k + c * c;
            acc += a * (c * co + k * s - c * decay) / denom;
            acc += b * (c * s - k * co + k * decay) / denom;
        }
        acc
    }
}

/// Batch-size law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawBatch")]
pub enum BatchDist {
    Fixed { n: u64 },
    /// `(size, probability)` pairs, sizes strictly increasing and ≥ 1.
    Empirical { pmf: Vec<(u64, f64)> },
    /// n-fold independent sum of `base` (sizes ≥ 0).
    DivisibleSum { base: Vec<(u64, f64)>, n: u64 },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawBatch {
    Fixed { n: u64 },
    Empirical { pmf: Vec<(u64, f64)> },
    DivisibleSum { base: Vec<(u64, f64)>, n: u64 },
}

impl TryFrom<RawBatch> for BatchDist {
    type Error = Error;
    fn try_from(raw: RawBatch) -> Result<Self> {
        let dist = match raw {
            RawBatch::Fixed { n } => BatchDist::Fixed { n },
            RawBatch::Empirical { pmf } => BatchDist::Empirical { pmf },
            RawBatch::DivisibleSum { base, n } => BatchDist::DivisibleSum { base, n },
        };
        dist.validate()?;
        Ok(dist)
    }
}

fn check_pmf(pmf: &[(u64, f64)], min_size: u64, what: &str) -> Result<()> {
    if pmf.is_empty() {
        return Err(Error::InvalidModel(format!("{what} pmf is empty")));
    }
    let mut prev: Option<u64> = None;
    let mut total = 0.0;
    for &(size, p) in pmf {
        if size < min_size {
            return Err(Error::InvalidModel(format!("{what} size {size} below {min_size}")));
        }
        if prev.is_some_and(|q| size <= q) {
            return Err(Error::InvalidModel(format!("{what} sizes must be strictly increasing")));
        }
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidModel(format!("{what} probability {p} is invalid")));
        }
        prev = Some(size);
        total += p;
    }
    if (total - 1.0).abs() > PMF_SUM_TOL {
        return Err(Error::InvalidModel(format!("{what} probabilities sum to {total}, not 1")));
    }
    Ok(())
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

impl BatchDist {
    pub fn fixed(n: u64) -> Result<Self> {
        let d = BatchDist::Fixed { n };
        d.validate()?;
        Ok(d)
    }

    pub fn empirical(pmf: Vec<(u64, f64)>) -> Result<Self> {
        let d = BatchDist::Empirical { pmf };
        d.validate()?;
        Ok(d)
    }

    pub fn divisible_sum(base: Vec<(u64, f64)>, n: u64) -> Result<Self> {
        let d = BatchDist::DivisibleSum { base, n };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BatchDist::Fixed { n } => {
                if *n == 0 {
                    return Err(Error::InvalidModel("fixed batch size must be >= 1".into()));
                }
            }
            BatchDist::Empirical { pmf } => check_pmf(pmf, 1, "batch")?,
            BatchDist::DivisibleSum { base, n } => {
                check_pmf(base, 0, "divisible base")?;
                if *n == 0 {
                    return Err(Error::InvalidModel("divisible sum count must be >= 1".into()));
                }
                if base.iter().all(|&(s, p)| s == 0 || p == 0.0) {
                    return Err(Error::InvalidModel("divisible base is identically zero".into()));
                }
            }
        }
        Ok(())
    }

    /// Full law as dense probabilities indexed by size (index 0 = size 0).
    pub fn dense_pmf(&self) -> Vec<f64> {
        fn dense(pmf: &[(u64, f64)]) -> Vec<f64> {
            let max = pmf.last().map_or(0, |&(s, _)| s) as usize;
            let mut v = vec![0.0; max + 1];
            for &(s, p) in pmf {
                v[s as usize] = p;
            }
            v
        }
        match self {
            BatchDist::Fixed { n } => {
                let mut v = vec![0.0; *n as usize + 1];
                v[*n as usize] = 1.0;
                v
            }
            BatchDist::Empirical { pmf } => dense(pmf),
            BatchDist::DivisibleSum { base, n } => {
                let base = dense(base);
                let mut acc = vec![1.0];
                let mut power = base;
                let mut k = *n;
                // binary powering of the convolution
                while k > 0 {
                    if k & 1 == 1 {
                        acc = convolve(&acc, &power);
                    }
                    k >>= 1;
                    if k > 0 {
                        power = convolve(&power, &power);
                    }
                }
                acc
            }
        }
    }

    /// `(size, probability)` pairs with nonzero probability, increasing size.
    pub fn support(&self) -> Vec<(u64, f64)> {
        self.dense_pmf()
            .into_iter()
            .enumerate()
            .filter(|&(_, p)| p > 0.0)
            .map(|(s, p)| (s as u64, p))
            .collect()
    }

    pub fn max_size(&self) -> u64 {
        match self {
            BatchDist::Fixed { n } => *n,
            BatchDist::Empirical { pmf } => pmf.last().map_or(0, |&(s, _)| s),
            BatchDist::DivisibleSum { base, n } => base.last().map_or(0, |&(s, _)| s) * n,
        }
    }

    /// Mean of the base law of a divisible sum.
    pub fn divisible_base_mean(&self) -> Option<f64> {
        match self {
            BatchDist::DivisibleSum { base, .. } => {
                Some(base.iter().map(|&(s, p)| s as f64 * p).sum())
            }
            _ => None,
        }
    }

    /// `(E[N], E[N²])`.
    pub fn moments(&self) -> (f64, f64) {
        fn raw(pmf: &[(u64, f64)]) -> (f64, f64) {
            pmf.iter().fold((0.0, 0.0), |(m1, m2), &(s, p)| {
                let s = s as f64;
                (m1 + p * s, m2 + p * s * s)
            })
        }
        match self {
            BatchDist::Fixed { n } => {
                let n = *n as f64;
                (n, n * n)
            }
            BatchDist::Empirical { pmf } => raw(pmf),
            BatchDist::DivisibleSum { base, n } => {
                let (m1, m2) = raw(base);
                let n = *n as f64;
                let mean = n * m1;
                (mean, n * (m2 - m1 * m1) + mean * mean)
            }
        }
    }

    /// `P{N ≥ j}`.
    pub fn ccdf(&self, j: u64) -> f64 {
        match self {
            BatchDist::Fixed { n } => {
                if j <= *n {
                    1.0
                } else {
                    0.0
                }
            }
            BatchDist::Empirical { pmf } => {
                pmf.iter().filter(|&&(s, _)| s >= j).map(|&(_, p)| p).sum()
            }
            BatchDist::DivisibleSum { .. } => {
                self.dense_pmf().iter().skip(j as usize).sum()
            }
        }
    }
}

/// Inverse-CDF sampler over a batch law's support.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    sizes: Vec<u64>,
    cdf: Vec<f64>,
}

impl BatchSampler {
    pub fn new(batch: &BatchDist) -> Self {
        let support = batch.support();
        let mut acc = 0.0;
        let mut sizes = Vec::with_capacity(support.len());
        let mut cdf = Vec::with_capacity(support.len());
        for (s, p) in support {
            acc += p;
            sizes.push(s);
            cdf.push(acc);
        }
        Self { sizes, cdf }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.sizes.len() == 1 {
            return self.sizes[0];
        }
        let u: f64 = rng.random::<f64>() * self.cdf[self.cdf.len() - 1];
        let idx = self.cdf.partition_point(|&c| c <= u);
        self.sizes[idx.min(self.sizes.len() - 1)]
    }
}

/// Service-time law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", try_from = "RawService")]
pub enum ServiceDist {
    Exponential { mu: f64 },
    Deterministic { d: f64 },
    /// Uniform on `(0, b)`.
    Uniform { b: f64 },
    Empirical { samples: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawService {
    Exponential { mu: f64 },
    Deterministic { d: f64 },
    Uniform { b: f64 },
    Empirical { samples: Vec<f64> },
}

impl TryFrom<RawService> for ServiceDist {
    type Error = Error;
    fn try_from(raw: RawService) -> Result<Self> {
        let dist = match raw {
            RawService::Exponential { mu } => ServiceDist::Exponential { mu },
            RawService::Deterministic { d } => ServiceDist::Deterministic { d },
            RawService::Uniform { b } => ServiceDist::Uniform { b },
            RawService::Empirical { samples } => ServiceDist::Empirical { samples },
        };
        dist.validate()?;
        Ok(dist)
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl ServiceDist {
    pub fn exponential(mu: f64) -> Result<Self> {
        positive("mu", mu)?;
        Ok(ServiceDist::Exponential { mu })
    }

    pub fn deterministic(d: f64) -> Result<Self> {
        positive("d", d)?;
        Ok(ServiceDist::Deterministic { d })
    }

    pub fn uniform(b: f64) -> Result<Self> {
        positive("b", b)?;
        Ok(ServiceDist::Uniform { b })
    }

    pub fn empirical(samples: Vec<f64>) -> Result<Self> {
        let d = ServiceDist::Empirical { samples };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ServiceDist::Exponential { mu } => positive("mu", *mu),
            ServiceDist::Deterministic { d } => positive("d", *d),
            ServiceDist::Uniform { b } => positive("b", *b),
            ServiceDist::Empirical { samples } => {
                if samples.is_empty() {
                    return Err(Error::InvalidModel("empirical service needs samples".into()));
                }
                samples.iter().try_for_each(|&s| positive("service sample", s))
            }
        }
    }

    /// Exponential rate, if this is exponential service.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self {
            ServiceDist::Exponential { mu } => Some(*mu),
            _ => None,
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ServiceDist::Exponential { mu } => 1.0 / mu,
            ServiceDist::Deterministic { d } => *d,
            ServiceDist::Uniform { b } => b / 2.0,
            ServiceDist::Empirical { samples } => {
                samples.iter().sum::<f64>() / samples.len() as f64
            }
        }
    }

    /// Upper end of the support; `None` when unbounded.
    pub fn support_max(&self) -> Option<f64> {
        match self {
            ServiceDist::Exponential { .. } => None,
            ServiceDist::Deterministic { d } => Some(*d),
            ServiceDist::Uniform { b } => Some(*b),
            ServiceDist::Empirical { samples } => samples.iter().copied().reduce(f64::max),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ServiceDist::Exponential { mu } => {
                let e: f64 = Exp1.sample(rng);
                e / mu
            }
            ServiceDist::Deterministic { d } => *d,
            ServiceDist::Uniform { b } => b * rng.random::<f64>(),
            ServiceDist::Empirical { samples } => samples[rng.random_range(0..samples.len())],
        }
    }

    /// `(E[S_(1,n)], ..., E[S_(n,n)])`, the expected order statistics of an
    /// n-sample.
    pub fn order_stat_means(&self, n: usize) -> Vec<f64> {
        match self {
            ServiceDist::Exponential { mu } => {
                let mut acc = 0.0;
                (1..=n)
                    .map(|j| {
                        acc += 1.0 / ((n - j + 1) as f64 * mu);
                        acc
                    })
                    .collect()
            }
            ServiceDist::Deterministic { d } => vec![*d; n],
            ServiceDist::Uniform { b } => {
                (1..=n).map(|j| j as f64 * b / (n + 1) as f64).collect()
            }
            ServiceDist::Empirical { samples } => empirical_order_stat_means(samples, n),
        }
    }

    /// Expected gaps `E[S_(j) - S_(j-1)]`, `j = 1..n`, with `S_(0) = 0`.
    pub fn order_stat_gap_means(&self, n: usize) -> Vec<f64> {
        match self {
            ServiceDist::Exponential { mu } => {
                (1..=n).map(|j| 1.0 / ((n - j + 1) as f64 * mu)).collect()
            }
            ServiceDist::Deterministic { d } => {
                let mut v = vec![0.0; n];
                if n > 0 {
                    v[0] = *d;
                }
                v
            }
            ServiceDist::Uniform { b } => vec![b / (n + 1) as f64; n],
            ServiceDist::Empirical { .. } => {
                let means = self.order_stat_means(n);
                let mut prev = 0.0;
                means
                    .into_iter()
                    .map(|m| {
                        let gap = (m - prev).max(0.0);
                        prev = m;
                        gap
                    })
                    .collect()
            }
        }
    }
}

fn empirical_order_stat_means(samples: &[f64], n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(ORDER_STAT_MC_SEED);
    let mut sums = vec![0.0; n];
    let mut tuple = vec![0.0; n];
    for _ in 0..ORDER_STAT_MC_TUPLES {
        for slot in tuple.iter_mut() {
            *slot = samples[rng.random_range(0..samples.len())];
        }
        tuple.sort_by(f64::total_cmp);
        for (acc, &v) in sums.iter_mut().zip(&tuple) {
            *acc += v;
        }
    }
    sums.iter().map(|s| s / ORDER_STAT_MC_TUPLES as f64).collect()
}

/// A queue instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueSpec {
    pub rate: RatePattern,
    pub batch: BatchDist,
    pub service: ServiceDist,
    #[serde(default)]
    pub q0: u64,
}

impl QueueSpec {
    pub fn new(rate: RatePattern, batch: BatchDist, service: ServiceDist, q0: u64) -> Result<Self> {
        batch.validate()?;
        service.validate()?;
        Ok(Self { rate, batch, service, q0 })
    }

    /// Stationary `M^n/M/∞` with the given parameters.
    pub fn markov_fixed(lambda: f64, mu: f64, n: u64, q0: u64) -> Result<Self> {
        Self::new(
            RatePattern::stationary(lambda)?,
            BatchDist::fixed(n)?,
            ServiceDist::exponential(mu)?,
            q0,
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
