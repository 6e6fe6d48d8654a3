//! Steady-state laws written as finite sums `Σ w_i · Pois(r_i)` of
//! independent scaled Poisson variables, with an exact sampler.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BatchDist, ServiceDist};
use crate::special_fn::ln_factorial;

/// Below this rate Poisson variates are drawn by inversion.
pub const POISSON_INVERSION_MAX_RATE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub weight: u64,
    pub rate: f64,
}

/// `Σ weight · Pois(rate)` over independent terms.
///
/// Terms are kept sorted by weight with equal weights merged and zero rates
/// dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSumRep {
    terms: Vec<Term>,
    /// Batch-size probability mass left out of the construction.
    pub truncation_tail_mass: f64,
}

impl PoissonSumRep {
    pub fn new(terms: impl IntoIterator<Item = Term>, truncation_tail_mass: f64) -> Result<Self> {
        let mut terms: Vec<Term> = terms.into_iter().collect();
        for t in &terms {
            if t.weight == 0 || !(t.rate >= 0.0) || !t.rate.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "term needs weight >= 1 and a finite rate >= 0, got ({}, {})",
                    t.weight, t.rate
                )));
            }
        }
        terms.sort_by_key(|t| t.weight);
        let mut merged: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.weight == t.weight => last.rate += t.rate,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.rate > 0.0);
        Ok(Self { terms: merged, truncation_tail_mass })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn mean(&self) -> f64 {
        self.terms.iter().map(|t| t.weight as f64 * t.rate).sum()
    }

    pub fn variance(&self) -> f64 {
        self.cumulant(2)
    }

    /// k-th cumulant `Σ w^k r`.
    pub fn cumulant(&self, k: u32) -> f64 {
        self.terms
            .iter()
            .map(|t| (t.weight as f64).powi(k as i32) * t.rate)
            .sum()
    }

    pub fn log_mgf(&self, theta: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.rate * (t.weight as f64 * theta).exp_m1())
            .sum()
    }

    pub fn mgf(&self, theta: f64) -> f64 {
        self.log_mgf(theta).exp()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["weight", "rate"])?;
        for t in &self.terms {
            out.write_record([t.weight.to_string(), format!("{:.16e}", t.rate)])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads terms written by [`PoissonSumRep::write_csv`]. The tail mass is
    /// not part of the format and comes back as 0.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let terms = rdr
            .deserialize::<Term>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(terms, 0.0)
    }
}

fn check_rates(lambda: f64, mu: f64) -> Result<()> {
    if lambda > 0.0 && mu > 0.0 && lambda.is_finite() && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain("λ and μ must be finite and > 0".into()))
    }
}

/// `M^n/M/∞`: terms `(j, λ/(jμ))`, `j = 1..n`.
pub fn rep_fixed_exponential(n: u64, lambda: f64, mu: f64) -> Result<PoissonSumRep> {
    check_rates(lambda, mu)?;
    if n == 0 {
        return Err(Error::Domain("batch size must be >= 1".into()));
    }
    PoissonSumRep::new(
        (1..=n).map(|j| Term { weight: j, rate: lambda / (j as f64 * mu) }),
        0.0,
    )
}

/// `M^n/G/∞`: terms `(n-j+1, λ E[S_(j) - S_(j-1)])`.
pub fn rep_fixed_general(n: u64, lambda: f64, service: &ServiceDist) -> Result<PoissonSumRep> {
    if n == 0 || !(lambda > 0.0) {
        return Err(Error::Domain("need n >= 1 and λ > 0".into()));
    }
    service.validate()?;
    let gaps = service.order_stat_gap_means(n as usize);
    PoissonSumRep::new(
        gaps.iter().enumerate().map(|(i, g)| Term {
            weight: n - i as u64,
            rate: lambda * g,
        }),
        0.0,
    )
}

/// `M^N/G/∞`: the fixed-batch construction per batch size, thinned by the
/// batch probabilities and merged.
///
/// Batch laws are finite here, so the construction is exact and `tail_eps`
/// only has to be a valid probability.
pub fn rep_random_general(
    batch: &BatchDist,
    lambda: f64,
    service: &ServiceDist,
    tail_eps: f64,
) -> Result<PoissonSumRep> {
    if !(tail_eps > 0.0 && tail_eps < 1.0) {
        return Err(Error::Domain(format!("tail_eps must lie in (0, 1), got {tail_eps}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::Domain("λ must be > 0".into()));
    }
    batch.validate()?;
    service.validate()?;
    let mut terms = Vec::new();
    for (size, p) in batch.support() {
        if size == 0 || p == 0.0 {
            continue;
        }
        let gaps = service.order_stat_gap_means(size as usize);
        terms.extend(gaps.iter().enumerate().map(|(i, g)| Term {
            weight: size - i as u64,
            rate: lambda * p * g,
        }));
    }
    PoissonSumRep::new(terms, 0.0)
}

/// `M^N/M/∞`: terms `(j, λ P(N ≥ j)/(jμ))`.
pub fn rep_random_markov(batch: &BatchDist, lambda: f64, mu: f64) -> Result<PoissonSumRep> {
    check_rates(lambda, mu)?;
    batch.validate()?;
    let max = batch.max_size();
    PoissonSumRep::new(
        (1..=max).map(|j| Term {
            weight: j,
            rate: lambda * batch.ccdf(j) / (j as f64 * mu),
        }),
        0.0,
    )
}

/// Poisson variate generator: inversion for small rates, Hörmann's PTRS
/// transformed rejection otherwise.
#[derive(Debug, Clone, Copy)]
pub struct PoissonSampler {
    rate: f64,
    kind: PoissonKind,
}

#[derive(Debug, Clone, Copy)]
enum PoissonKind {
    Zero,
    Inversion { p0: f64 },
    Ptrs { b: f64, a: f64, inv_alpha: f64, v_r: f64, ln_rate: f64 },
}

impl PoissonSampler {
    pub fn new(rate: f64) -> Self {
        let kind = if rate <= 0.0 {
            PoissonKind::Zero
        } else if rate < POISSON_INVERSION_MAX_RATE {
            PoissonKind::Inversion { p0: (-rate).exp() }
        } else {
            let sq = rate.sqrt();
            let b = 0.931 + 2.53 * sq;
            let a = -0.059 + 0.02483 * b;
            PoissonKind::Ptrs {
                b,
                a,
                inv_alpha: 1.1239 + 1.1328 / (b - 3.4),
                v_r: 0.9277 - 3.6224 / (b - 2.0),
                ln_rate: rate.ln(),
            }
        };
        Self { rate, kind }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self.kind {
            PoissonKind::Zero => 0,
            PoissonKind::Inversion { p0 } => {
                let u: f64 = rng.random();
                let mut k = 0u64;
                let mut p = p0;
                let mut cdf = p0;
                while u > cdf {
                    k += 1;
                    p *= self.rate / k as f64;
                    let next = cdf + p;
                    if next == cdf {
                        break;
                    }
                    cdf = next;
                }
                k
            }
            PoissonKind::Ptrs { b, a, inv_alpha, v_r, ln_rate } => loop {
                let u = rng.random::<f64>() - 0.5;
                let v: f64 = rng.random();
                let us = 0.5 - u.abs();
                let k = ((2.0 * a / us + b) * u + self.rate + 0.43).floor();
                if us >= 0.07 && v <= v_r {
                    return k as u64;
                }
                if k < 0.0 || (us < 0.013 && v > us) {
                    continue;
                }
                let lhs = (v * inv_alpha / (a / (us * us) + b)).ln();
                let rhs = -self.rate + k * ln_rate - ln_factorial(k as u64);
                if lhs <= rhs {
                    return k as u64;
                }
            },
        }
    }
}

/// `count` i.i.d. draws of the represented law, deterministic per seed.
///
/// When the total rate is below the number of terms (many small rates, as in
/// the batch-scaled laws) each draw takes `K ~ Pois(Σ r)` events and labels
/// them with term `i` w.p. `r_i / Σ r`, which is the same law by Poisson
/// splitting. Otherwise every term is sampled directly.
pub fn rep_sample(rep: &PoissonSumRep, seed: u64, count: usize) -> Result<Vec<u64>> {
    if count == 0 {
        return Err(Error::Domain("count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: f64 = rep.terms.iter().map(|t| t.rate).sum();
    if total < rep.terms.len() as f64 {
        let events = PoissonSampler::new(total);
        let mut acc = 0.0;
        let cumulative: Vec<f64> = rep
            .terms
            .iter()
            .map(|t| {
                acc += t.rate;
                acc
            })
            .collect();
        let last = rep.terms.len().saturating_sub(1);
        return Ok((0..count)
            .map(|_| {
                let k = events.sample(&mut rng);
                (0..k)
                    .map(|_| {
                        let u = rng.random::<f64>() * total;
                        let i = cumulative.partition_point(|&c| c <= u).min(last);
                        rep.terms[i].weight
                    })
                    .sum()
            })
            .collect());
    }
    let samplers: Vec<(u64, PoissonSampler)> = rep
        .terms
        .iter()
        .map(|t| (t.weight, PoissonSampler::new(t.rate)))
        .collect();
    Ok((0..count)
        .map(|_| samplers.iter().map(|(w, s)| w * s.sample(&mut rng)).sum())
        .collect())
}

/// Draws of `Σ_{j=1..n} (j/n) Pois(λ/(jμ))`, the batch-scaled `M^n/M/∞`
/// steady state.
pub fn scaled_limit_sample(n: u64, lambda: f64, mu: f64, seed: u64, count: usize) -> Result<Vec<f64>> {
    let rep = rep_fixed_exponential(n, lambda, mu)?;
    let nf = n as f64;
    Ok(rep_sample(&rep, seed, count)?
        .into_iter()
        .map(|x| x as f64 / nf)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn pairs(rep: &PoissonSumRep) -> Vec<(u64, f64)> {
        rep.terms().iter().map(|t| (t.weight, t.rate)).collect()
    }

    #[test]
    fn fixed_exponential_examples() {
        assert_eq!(pairs(&rep_fixed_exponential(1, 1.0, 1.0).unwrap()), vec![(1, 1.0)]);
        assert_eq!(
            pairs(&rep_fixed_exponential(2, 1.0, 1.0).unwrap()),
            vec![(1, 1.0), (2, 0.5)]
        );
        assert!((rep_fixed_exponential(3, 2.0, 1.0).unwrap().mean() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn fixed_general_examples() {
        let det = rep_fixed_general(4, 1.5, &ServiceDist::deterministic(2.0).unwrap()).unwrap();
        assert_eq!(pairs(&det), vec![(4, 3.0)]);
        let exp = rep_fixed_general(3, 1.0, &ServiceDist::exponential(1.0).unwrap()).unwrap();
        let want = [(1, 1.0), (2, 0.5), (3, 1.0 / 3.0)];
        for (got, want) in pairs(&exp).iter().zip(want) {
            assert_eq!(got.0, want.0);
            assert!((got.1 - want.1).abs() < 1e-15);
        }
        let uni = rep_fixed_general(3, 1.0, &ServiceDist::uniform(1.0).unwrap()).unwrap();
        for (w, r) in pairs(&uni) {
            assert!((1..=3).contains(&w));
            assert!((r - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn random_batch_examples() {
        let batch = BatchDist::empirical(vec![(1, 0.5), (2, 0.5)]).unwrap();
        let exp1 = ServiceDist::exponential(1.0).unwrap();
        let general = rep_random_general(&batch, 1.0, &exp1, 1e-9).unwrap();
        assert!((general.mean() - 1.5).abs() < 1e-14);
        assert_eq!(general.truncation_tail_mass, 0.0);
        let markov = rep_random_markov(&batch, 1.0, 1.0).unwrap();
        assert_eq!(pairs(&markov), vec![(1, 1.0), (2, 0.25)]);
        for i in 0..=40 {
            let theta = -2.0 + 2.5 * i as f64 / 40.0;
            assert!((general.mgf(theta) - markov.mgf(theta)).abs() < 1e-10);
        }
        let two = BatchDist::empirical(vec![(2, 1.0)]).unwrap();
        assert_eq!(pairs(&rep_random_markov(&two, 3.0, 2.0).unwrap()), vec![(1, 1.5), (2, 0.75)]);
        assert!(rep_random_general(&batch, 1.0, &exp1, 0.0).is_err());
    }

    #[test]
    fn fixed_batch_reduces() {
        let exp = ServiceDist::exponential(0.7).unwrap();
        let a = rep_random_general(&BatchDist::fixed(4).unwrap(), 1.3, &exp, 0.01).unwrap();
        let b = rep_fixed_general(4, 1.3, &exp).unwrap();
        assert_eq!(a, b);
        let c = rep_random_markov(&BatchDist::fixed(4).unwrap(), 1.3, 0.7).unwrap();
        let d = rep_fixed_exponential(4, 1.3, 0.7).unwrap();
        for (x, y) in pairs(&c).iter().zip(pairs(&d)) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).abs() < 1e-15);
        }
    }

    #[test]
    fn merging_and_validation() {
        let rep = PoissonSumRep::new(
            [
                Term { weight: 2, rate: 0.5 },
                Term { weight: 1, rate: 0.0 },
                Term { weight: 2, rate: 0.25 },
            ],
            0.0,
        )
        .unwrap();
        assert_eq!(pairs(&rep), vec![(2, 0.75)]);
        assert!(PoissonSumRep::new([Term { weight: 0, rate: 1.0 }], 0.0).is_err());
        assert!(PoissonSumRep::new([Term { weight: 1, rate: -1.0 }], 0.0).is_err());
    }

    #[test]
    fn zero_rate_samples_zero() {
        let rep = PoissonSumRep::new([Term { weight: 1, rate: 0.0 }], 0.0).unwrap();
        assert!(rep_sample(&rep, 3, 100).unwrap().iter().all(|&x| x == 0));
        assert!(rep_sample(&rep, 3, 0).is_err());
    }

    #[test]
    fn sampler_moments() {
        let rep = rep_fixed_exponential(2, 1.0, 1.0).unwrap();
        let xs: Vec<f64> = rep_sample(&rep, 11, 1_000_000)
            .unwrap()
            .into_iter()
            .map(|x| x as f64)
            .collect();
        let m = stats::mean(&xs);
        let v = stats::variance(&xs);
        assert!((m - 2.0).abs() < 0.006, "mean {m}");
        assert!((v - 3.0).abs() < 0.02, "variance {v}");
    }

    #[test]
    fn poisson_sampler_both_regimes() {
        for &rate in &[0.3, 4.0, 9.99, 10.0, 37.5, 400.0] {
            let s = PoissonSampler::new(rate);
            let mut rng = ChaCha8Rng::seed_from_u64(rate.to_bits());
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| s.sample(&mut rng) as f64).collect();
            let m = stats::mean(&xs);
            let v = stats::variance(&xs);
            let se_mean = (rate / n as f64).sqrt();
            assert!((m - rate).abs() < 4.0 * se_mean, "rate {rate}: mean {m}");
            // Var of the sample variance of a Poisson is ≈ (2λ² + λ)/n
            let se_var = ((2.0 * rate * rate + rate) / n as f64).sqrt();
            assert!((v - rate).abs() < 4.0 * se_var, "rate {rate}: variance {v}");
        }
    }

    #[test]
    fn ptrs_pmf_matches() {
        let rate = 15.0;
        let s = PoissonSampler::new(rate);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 400_000;
        let mut counts = vec![0usize; 80];
        for _ in 0..n {
            let k = s.sample(&mut rng) as usize;
            counts[k.min(79)] += 1;
        }
        let mut tv = 0.0;
        for (k, c) in counts.iter().enumerate() {
            let p = (-rate + k as f64 * rate.ln() - ln_factorial(k as u64)).exp();
            tv += (*c as f64 / n as f64 - p).abs();
        }
        assert!(0.5 * tv < 0.01, "tv {}", 0.5 * tv);
    }

    #[test]
    fn split_path_matches_pmf() {
        // 8 terms with total rate ≈ 2.7 take the splitting path
        let rep = rep_fixed_exponential(8, 1.0, 1.0).unwrap();
        assert!(rep.terms().iter().map(|t| t.rate).sum::<f64>() < 8.0);
        let pmf = crate::analytic::steady_pmf_fixed_markov(8, 1.0, 1.0, 200).unwrap().probs;
        let xs = rep_sample(&rep, 77, 400_000).unwrap();
        assert!(stats::tv_distance(&stats::histogram(&xs), &pmf) < 0.005);
    }

    #[test]
    fn sampling_is_deterministic() {
        let rep = rep_fixed_exponential(5, 30.0, 1.0).unwrap();
        assert_eq!(rep_sample(&rep, 42, 1000).unwrap(), rep_sample(&rep, 42, 1000).unwrap());
        assert_ne!(rep_sample(&rep, 42, 1000).unwrap(), rep_sample(&rep, 43, 1000).unwrap());
    }

    #[test]
    fn scaled_samples() {
        let one = scaled_limit_sample(1, 2.0, 1.0, 9, 10).unwrap();
        let rep = rep_fixed_exponential(1, 2.0, 1.0).unwrap();
        let plain = rep_sample(&rep, 9, 10).unwrap();
        assert!(one.iter().zip(plain).all(|(a, b)| *a == b as f64));
        let xs = scaled_limit_sample(2000, 1.0, 1.0, 17, 100_000).unwrap();
        let m = stats::mean(&xs);
        let se = (stats::variance(&xs) / xs.len() as f64).sqrt();
        assert!((m - 1.0).abs() < 3.0 * se);
    }

    #[test]
    fn csv_round_trip() {
        let rep = rep_fixed_exponential(4, 1.7, 0.3).unwrap();
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("weight,rate\n"));
        let back = PoissonSumRep::read_csv(buf.as_slice()).unwrap();
        assert_eq!(rep, back);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mean_is_rate_times_batch_times_service(
            lambda in 0.1f64..5.0,
            mu in 0.2f64..4.0,
            n in 1u64..8,
            p in 0.05f64..0.95,
        ) {
            let exp = ServiceDist::exponential(mu).unwrap();
            let a = rep_fixed_exponential(n, lambda, mu).unwrap();
            let b = rep_fixed_general(n, lambda, &exp).unwrap();
            let want = lambda * n as f64 / mu;
            prop_assert!((a.mean() - want).abs() < 1e-9 * want.max(1.0));
            prop_assert!((b.mean() - want).abs() < 1e-9 * want.max(1.0));
            let batch = BatchDist::empirical(vec![(1, p), (n + 1, 1.0 - p)]).unwrap();
            let en = p + (n + 1) as f64 * (1.0 - p);
            let c = rep_random_general(&batch, lambda, &exp, 0.01).unwrap();
            let d = rep_random_markov(&batch, lambda, mu).unwrap();
            prop_assert!((c.mean() - lambda * en / mu).abs() < 1e-9);
            prop_assert!((d.mean() - lambda * en / mu).abs() < 1e-9);
        }

        #[test]
        fn exponential_constructions_agree(
            lambda in 0.1f64..3.0,
            mu in 0.2f64..3.0,
            n in 1u64..=8,
            theta in -2.0f64..0.5,
        ) {
            let a = rep_fixed_exponential(n, lambda, mu).unwrap();
            let b = rep_fixed_general(n, lambda, &ServiceDist::exponential(mu).unwrap()).unwrap();
            let (x, y) = (a.mgf(theta), b.mgf(theta));
            prop_assert!((x - y).abs() < 1e-10 * x.max(1.0));
        }

        #[test]
        fn markov_and_general_random_agree(
            lambda in 0.1f64..3.0,
            mu in 0.2f64..3.0,
            w in proptest::collection::vec(0.01f64..1.0, 1..6),
            theta in -2.0f64..0.5,
        ) {
            let total: f64 = w.iter().sum();
            let pmf: Vec<(u64, f64)> = w.iter().enumerate().map(|(i, x)| (i as u64 + 1, x / total)).collect();
            let batch = BatchDist::empirical(pmf).unwrap();
            let a = rep_random_markov(&batch, lambda, mu).unwrap();
            let b = rep_random_general(&batch, lambda, &ServiceDist::exponential(mu).unwrap(), 0.01).unwrap();
            let (x, y) = (a.mgf(theta), b.mgf(theta));
            prop_assert!((x - y).abs() < 1e-10 * x.max(1.0));
        }
    }
}
