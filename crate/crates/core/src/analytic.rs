//! Closed-form quantities for `M_t^n/M/∞` and `M_t^N/M/∞`: moment generating
//! functions, moments, the steady-state PMF recursion, cumulants of the
//! batch-scaled queue, sub-queue covariances and the three limit regimes.
//!
//! Steady-state values have their own `*_steady` entry points instead of
//! being evaluated at a large `t`.

use crate::error::{Error, Result};
use crate::model::{BatchDist, QueueSpec, RatePattern};
use crate::quad::{adaptive_simpson, QUAD_ABS_TOL};
use crate::special_fn::{
    bernoulli, binomial, exp_integral_e1, exp_integral_ei, falling_factorial, harmonic,
    trunc_polylog, EULER_GAMMA,
};

/// Probabilities below this are reported as zero by the PMF recursion.
pub const PMF_UNDERFLOW: f64 = 1e-300;
/// Required agreement between the direct and Faulhaber cumulant paths.
pub const CUMULANT_CROSSCHECK_TOL: f64 = 1e-9;
/// Terms of the harmonic-number series for the scaled-limit MGF.
pub const HARMONIC_SERIES_TERMS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPair {
    pub mean: f64,
    pub variance: f64,
}

fn exponential_mu(spec: &QueueSpec) -> Result<f64> {
    spec.service
        .exponential_rate()
        .ok_or_else(|| Error::Domain("closed forms require exponential service".into()))
}

fn fixed_n(spec: &QueueSpec) -> Result<u64> {
    match spec.batch {
        BatchDist::Fixed { n } => Ok(n),
        _ => Err(Error::Domain("closed form requires a fixed batch size".into())),
    }
}

fn require_stationary(rate: &RatePattern) -> Result<()> {
    if rate.is_stationary() {
        Ok(())
    } else {
        Err(Error::Domain(
            "a periodic arrival rate has no stationary limit".into(),
        ))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("time must be finite and >= 0, got {t}")))
    }
}

/// Log of the transient MGF of `M_t^n/M/∞` (fixed batch, exponential service).
///
/// The binomial sum alternates for `θ < 0` and loses accuracy once
/// `C(n, n/2)·|e^θ - 1|^{n/2}` is large; keep `n` moderate (tens) there.
pub fn transient_cgf_fixed(spec: &QueueSpec, theta: f64, t: f64) -> Result<f64> {
    let n = fixed_n(spec)?;
    let mu = exponential_mu(spec)?;
    check_time(t)?;
    let x = theta.exp_m1();
    let mut cgf = spec.q0 as f64 * ((-mu * t).exp() * x).ln_1p();
    let mut xj = 1.0;
    for j in 1..=n {
        xj *= x;
        cgf += binomial(n, j) * xj * spec.rate.discounted_integral(j as f64 * mu, t);
    }
    Ok(cgf)
}

/// Transient MGF `E[e^{θ Q_t}]` of `M_t^n/M/∞` with deterministic `Q_0`.
pub fn transient_mgf_fixed(spec: &QueueSpec, theta: f64, t: f64) -> Result<f64> {
    transient_cgf_fixed(spec, theta, t).map(f64::exp)
}

/// Steady-state MGF of `M^n/M/∞`, binomial form
/// `exp(λ Σ_j C(n,j)(e^θ-1)^j / (jμ))`.
pub fn steady_mgf_fixed(spec: &QueueSpec, theta: f64) -> Result<f64> {
    let n = fixed_n(spec)?;
    let mu = exponential_mu(spec)?;
    require_stationary(&spec.rate)?;
    let lambda = spec.rate.base();
    Ok((lambda / mu * binomial_exponent(n, theta)).exp())
}

/// `Σ_{k=1..n} C(n,k)(e^θ-1)^k / k`.
pub fn binomial_exponent(n: u64, theta: f64) -> f64 {
    let x = theta.exp_m1();
    let mut xk = 1.0;
    (1..=n)
        .map(|k| {
            xk *= x;
            binomial(n, k) * xk / k as f64
        })
        .sum()
}

/// `Σ_{k=1..n} (e^{kθ}-1) / k`.
pub fn harmonic_exponent(n: u64, theta: f64) -> f64 {
    (1..=n).map(|k| (k as f64 * theta).exp_m1() / k as f64).sum()
}

/// Steady-state MGF of `M^n/M/∞` as a product of scaled Poisson MGFs.
pub fn steady_mgf_poisson_form(n: u64, lambda: f64, mu: f64, theta: f64) -> f64 {
    (lambda / mu * harmonic_exponent(n, theta)).exp()
}

/// Steady-state MGF of `M^n/M/∞` via `exp((λ/μ)(Li(e^θ, n, 1) - H_n))`.
pub fn steady_mgf_polylog_form(n: u64, lambda: f64, mu: f64, theta: f64) -> f64 {
    (lambda / mu * (trunc_polylog(theta.exp(), n, 1.0) - harmonic(n))).exp()
}

fn moments_from(q0: f64, mu: f64, t: f64, mean_n: f64, second_n: f64, rate: &RatePattern) -> MomentPair {
    let d1 = (-mu * t).exp();
    let d2 = (-2.0 * mu * t).exp();
    let i1 = rate.discounted_integral(mu, t);
    let i2 = rate.discounted_integral(2.0 * mu, t);
    MomentPair {
        mean: q0 * d1 + mean_n * i1,
        variance: q0 * (d1 - d2) + mean_n * i1 + (second_n - mean_n) * i2,
    }
}

/// Transient mean and variance of `M_t^n/M/∞`.
pub fn mean_var_fixed(spec: &QueueSpec, t: f64) -> Result<MomentPair> {
    let n = fixed_n(spec)? as f64;
    let mu = exponential_mu(spec)?;
    check_time(t)?;
    Ok(moments_from(spec.q0 as f64, mu, t, n, n * n, &spec.rate))
}

/// Steady-state mean `nλ/μ` and variance `n(n+1)λ/(2μ)` of `M^n/M/∞`.
pub fn mean_var_fixed_steady(spec: &QueueSpec) -> Result<MomentPair> {
    let n = fixed_n(spec)? as f64;
    let mu = exponential_mu(spec)?;
    require_stationary(&spec.rate)?;
    let lambda = spec.rate.base();
    Ok(MomentPair {
        mean: n * lambda / mu,
        variance: n * (n + 1.0) * lambda / (2.0 * mu),
    })
}

/// Transient mean and variance of `M_t^N/M/∞` with random batch size.
pub fn mean_var_random(spec: &QueueSpec, t: f64) -> Result<MomentPair> {
    let mu = exponential_mu(spec)?;
    check_time(t)?;
    let (m1, m2) = spec.batch.moments();
    Ok(moments_from(spec.q0 as f64, mu, t, m1, m2, &spec.rate))
}

/// Same as [`mean_var_random`] but with the rate integrals done by quadrature.
pub fn mean_var_random_quadrature(spec: &QueueSpec, t: f64) -> Result<MomentPair> {
    let mu = exponential_mu(spec)?;
    check_time(t)?;
    let (m1, m2) = spec.batch.moments();
    let rate = &spec.rate;
    let i1 = adaptive_simpson(&|s| rate.rate_at(s) * (mu * (s - t)).exp(), 0.0, t, QUAD_ABS_TOL);
    let i2 = adaptive_simpson(&|s| rate.rate_at(s) * (2.0 * mu * (s - t)).exp(), 0.0, t, QUAD_ABS_TOL);
    let q0 = spec.q0 as f64;
    let d1 = (-mu * t).exp();
    let d2 = (-2.0 * mu * t).exp();
    Ok(MomentPair {
        mean: q0 * d1 + m1 * i1,
        variance: q0 * (d1 - d2) + m1 * i1 + (m2 - m1) * i2,
    })
}

/// Steady-state mean `λE[N]/μ` and variance `λE[N]/μ + (λ/2μ)(E[N²]-E[N])`.
pub fn mean_var_random_steady(spec: &QueueSpec) -> Result<MomentPair> {
    let mu = exponential_mu(spec)?;
    require_stationary(&spec.rate)?;
    let lambda = spec.rate.base();
    let (m1, m2) = spec.batch.moments();
    Ok(MomentPair {
        mean: lambda * m1 / mu,
        variance: lambda * m1 / mu + lambda / (2.0 * mu) * (m2 - m1),
    })
}

/// Output of [`steady_pmf_fixed_markov`].
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyPmf {
    /// `p_0 ..= p_{j_max}`.
    pub probs: Vec<f64>,
    /// Set when some probability fell below [`PMF_UNDERFLOW`] and was zeroed.
    pub underflow: bool,
}

/// Harmonic Hermite PMF by the recursion
/// `p_j = (λ/(jμ)) Σ_{i=1..n} p_{j-i}`, `p_0 = e^{-(λ/μ) H_n}`.
pub fn steady_pmf_fixed_markov(n: u64, lambda: f64, mu: f64, j_max: usize) -> Result<SteadyPmf> {
    if n == 0 || !(lambda > 0.0) || !(mu > 0.0) {
        return Err(Error::Domain("pmf recursion needs n >= 1 and λ, μ > 0".into()));
    }
    let rho = lambda / mu;
    let n = n as usize;
    let mut probs = Vec::with_capacity(j_max + 1);
    let mut underflow = false;
    let p0 = (-rho * harmonic(n as u64)).exp();
    if p0 < PMF_UNDERFLOW {
        underflow = true;
        probs.push(0.0);
    } else {
        probs.push(p0);
    }
    // window = p_{j-1} + ... + p_{j-n}
    let mut window = 0.0;
    for j in 1..=j_max {
        window += probs[j - 1];
        if j > n {
            window -= probs[j - 1 - n];
        }
        let mut p = rho / j as f64 * window.max(0.0);
        if p < PMF_UNDERFLOW && p != 0.0 {
            underflow = true;
            p = 0.0;
        }
        probs.push(p);
    }
    Ok(SteadyPmf { probs, underflow })
}

/// k-th steady-state cumulant of `Q_∞(n)/n` by direct summation,
/// `(λ/μ) n^{-k} Σ_{j=1..n} j^{k-1}`.
pub fn cumulant_scaled_direct(k: u32, n: u64, lambda: f64, mu: f64) -> f64 {
    let nf = n as f64;
    let sum: f64 = (1..=n).map(|j| (j as f64 / nf).powi(k as i32 - 1)).sum();
    lambda / mu * sum / nf
}

/// Same cumulant through Faulhaber's formula with Bernoulli numbers.
pub fn cumulant_scaled_faulhaber(k: u32, n: u64, lambda: f64, mu: f64) -> Result<f64> {
    if k == 0 || n == 0 {
        return Err(Error::Domain("cumulant needs k >= 1 and n >= 1".into()));
    }
    let rho = lambda / mu;
    if k == 1 {
        // Σ_{j≤n} j^0 = n exactly; the half-term below only exists for k ≥ 2
        return Ok(rho);
    }
    let nf = n as f64;
    let kf = k as f64;
    let mut acc = 1.0 / kf + 0.5 / nf;
    let mut factorial = 2.0;
    for j in 2..k {
        if j > 2 {
            factorial *= j as f64;
        }
        let b = bernoulli(j)?;
        if b != 0.0 {
            acc += b / factorial * falling_factorial(kf - 1.0, j - 1) * nf.powi(-(j as i32));
        }
    }
    Ok(rho * acc)
}

/// k-th cumulant of the batch-scaled steady queue. Both summation routes are
/// evaluated and must agree to [`CUMULANT_CROSSCHECK_TOL`].
pub fn cumulant_scaled(k: u32, n: u64, lambda: f64, mu: f64) -> Result<f64> {
    let direct = cumulant_scaled_direct(k, n, lambda, mu);
    let faulhaber = cumulant_scaled_faulhaber(k, n, lambda, mu)?;
    if (direct - faulhaber).abs() > CUMULANT_CROSSCHECK_TOL * direct.abs().max(1.0) {
        return Err(Error::Domain(format!(
            "cumulant cross-check failed for k={k}, n={n}: {direct} vs {faulhaber}"
        )));
    }
    Ok(direct)
}

/// `lim_{n→∞}` of [`cumulant_scaled`], equal to `λ/(kμ)`.
pub fn cumulant_scaled_limit(k: u32, lambda: f64, mu: f64) -> f64 {
    lambda / (k as f64 * mu)
}

/// Steady-state MGF of `Q_∞(n)/n` for `M^n/M/∞`.
pub fn scaled_steady_mgf(theta: f64, n: u64, lambda: f64, mu: f64) -> f64 {
    let nf = n as f64;
    let s: f64 = (1..=n)
        .map(|k| (k as f64 * theta / nf).exp_m1() / k as f64)
        .sum();
    (lambda / mu * s).exp()
}

/// Transient MGF of `Q_t(n)/n` for `M^n/M/∞` started empty.
pub fn scaled_transient_mgf(theta: f64, t: f64, n: u64, lambda: f64, mu: f64) -> Result<f64> {
    let spec = QueueSpec::markov_fixed(lambda, mu, n, 0)?;
    transient_mgf_fixed(&spec, theta / n as f64, t)
}

fn check_limit_params(lambda: f64, mu: f64, mean_b: f64) -> Result<()> {
    if lambda > 0.0 && mu > 0.0 && mean_b > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain("λ, μ and E[B] must be > 0".into()))
    }
}

/// Limit MGF of the batch-scaled queue `Q_t(n)/n` as `n → ∞`, started empty.
///
/// With a divisible batch law of base mean `mean_b` the limit is the fixed
/// batch limit evaluated at `θ·mean_b`; `mean_b = 1` is the fixed-batch case.
pub fn scaled_limit_mgf(theta: f64, t: f64, lambda: f64, mu: f64, mean_b: f64) -> Result<f64> {
    check_limit_params(lambda, mu, mean_b)?;
    check_time(t)?;
    let x = theta * mean_b;
    let decay = (-mu * t).exp();
    let inner = if x > 0.0 {
        exp_integral_ei(x)? - exp_integral_ei(x * decay)? - mu * t
    } else if x < 0.0 {
        exp_integral_e1(-x * decay)? - exp_integral_e1(-x)? - mu * t
    } else {
        return Ok(1.0);
    };
    Ok((lambda / mu * inner).exp())
}

/// Steady-state limit of [`scaled_limit_mgf`].
pub fn scaled_limit_mgf_steady(theta: f64, lambda: f64, mu: f64, mean_b: f64) -> Result<f64> {
    check_limit_params(lambda, mu, mean_b)?;
    let rho = lambda / mu;
    let x = theta * mean_b;
    if x > 0.0 {
        Ok(x.powf(-rho) * (rho * (exp_integral_ei(x)? - EULER_GAMMA)).exp())
    } else if x < 0.0 {
        Ok((-x).powf(-rho) * (-rho * (exp_integral_e1(-x)? + EULER_GAMMA)).exp())
    } else {
        Ok(1.0)
    }
}

/// Steady scaled-limit MGF for `θ < 0` via the harmonic-number series
/// `exp(-(λ/μ) e^θ Σ_n H_n (-θ)^n / n!)`, i.e. `exp(-(λ/μ) E[H_N])`,
/// `N ~ Pois(-θ)`.
pub fn scaled_limit_mgf_harmonic(theta: f64, lambda: f64, mu: f64) -> Result<f64> {
    if !(theta < 0.0) {
        return Err(Error::Domain("harmonic series form needs θ < 0".into()));
    }
    let x = -theta;
    let mut weight = 1.0;
    let mut h = 0.0;
    let mut sum = 0.0;
    for n in 1..=HARMONIC_SERIES_TERMS {
        weight *= x / n as f64;
        h += 1.0 / n as f64;
        sum += h * weight;
    }
    Ok((-(lambda / mu) * theta.exp() * sum).exp())
}

/// Covariance of two identically routed sub-queues,
/// `e^{-2μt} ∫_0^t λ(s) e^{2μs} ds`, in closed form.
pub fn subqueue_covariance(rate: &RatePattern, mu: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(rate.discounted_integral(2.0 * mu, t))
}

/// [`subqueue_covariance`] by adaptive quadrature of the defining integral.
pub fn subqueue_covariance_quadrature(rate: &RatePattern, mu: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    Ok(adaptive_simpson(
        &|s| rate.rate_at(s) * (2.0 * mu * (s - t)).exp(),
        0.0,
        t,
        QUAD_ABS_TOL,
    ))
}

/// Stationary-rate steady covariance `λ/(2μ)`.
pub fn subqueue_covariance_steady(rate: &RatePattern, mu: f64) -> Result<f64> {
    require_stationary(rate)?;
    Ok(rate.base() / (2.0 * mu))
}

/// Correlation of two identically routed sub-queues under a stationary rate,
/// given their initial counts.
pub fn subqueue_correlation(q0_i: u64, q0_j: u64, lambda: f64, mu: f64, t: f64) -> Result<f64> {
    check_time(t)?;
    let d1 = (-mu * t).exp();
    let d2 = (-2.0 * mu * t).exp();
    let base = lambda / mu * (-(-mu * t).exp_m1());
    let vi = q0_i as f64 * (d1 - d2) + base;
    let vj = q0_j as f64 * (d1 - d2) + base;
    if vi <= 0.0 || vj <= 0.0 {
        return Err(Error::DegenerateDenominator(format!(
            "sub-queue variance is zero at t = {t}"
        )));
    }
    let cov = lambda / (2.0 * mu) * (-(-2.0 * mu * t).exp_m1());
    Ok(cov / (vi * vj).sqrt())
}

/// Steady-state sub-queue correlation, exactly 1/2.
pub fn subqueue_correlation_steady() -> f64 {
    0.5
}

/// Fluid-limit MGF `exp((λE[N]θ/μ)(1-e^{-μt}) + q0 θ e^{-μt})`.
pub fn fluid_mgf(theta: f64, t: f64, lambda: f64, mu: f64, mean_n: f64, q0: f64) -> Result<f64> {
    check_time(t)?;
    let d = (-mu * t).exp();
    Ok((lambda * mean_n * theta / mu * (1.0 - d) + q0 * theta * d).exp())
}

pub fn fluid_mgf_steady(theta: f64, lambda: f64, mu: f64, mean_n: f64) -> f64 {
    (lambda * mean_n * theta / mu).exp()
}

/// Diffusion-limit MGF
/// `exp((λθ²/4μ)(E[N]+E[N²])(1-e^{-μt}) + θ q0 e^{-μt})`.
pub fn diffusion_mgf(
    theta: f64,
    t: f64,
    lambda: f64,
    mu: f64,
    mean_n: f64,
    second_moment_n: f64,
    q0: f64,
) -> Result<f64> {
    check_time(t)?;
    let d = (-mu * t).exp();
    Ok((lambda * theta * theta / (4.0 * mu) * (mean_n + second_moment_n) * (1.0 - d) + theta * q0 * d).exp())
}

/// Gaussian parameters of the steady-state diffusion approximation:
/// mean `λE[N]/μ`, variance `(λ/2μ)(E[N] + E[N²])`.
pub fn diffusion_params(lambda: f64, mu: f64, mean_n: f64, second_moment_n: f64) -> Result<MomentPair> {
    if !(lambda > 0.0 && mu > 0.0 && mean_n > 0.0 && second_moment_n > 0.0) {
        return Err(Error::Domain("diffusion parameters must be positive".into()));
    }
    Ok(MomentPair {
        mean: lambda * mean_n / mu,
        variance: lambda / (2.0 * mu) * (mean_n + second_moment_n),
    })
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn binomial_and_harmonic_exponents_agree(n in 1u64..=8, theta in -2.0f64..1.0) {
            let a = binomial_exponent(n, theta);
            let b = harmonic_exponent(n, theta);
            prop_assert!((a - b).abs() < 1e-10);
        }

        #[test]
        fn cumulant_paths_agree(k in 1u32..=10, n in 1u64..=10_000, rho in 0.1f64..5.0) {
            let d = cumulant_scaled_direct(k, n, rho, 1.0);
            let f = cumulant_scaled_faulhaber(k, n, rho, 1.0).unwrap();
            prop_assert!((d - f).abs() < 1e-9);
        }

        #[test]
        fn moments_are_nonnegative(
            lambda in 0.1f64..5.0,
            amp in 0.0f64..1.0,
            mu in 0.1f64..3.0,
            n in 1u64..6,
            q0 in 0u64..10,
            t in 0.0f64..30.0,
        ) {
            let spec = QueueSpec::new(
                RatePattern::new(lambda, vec![amp * lambda], vec![]).unwrap(),
                BatchDist::fixed(n).unwrap(),
                crate::model::ServiceDist::exponential(mu).unwrap(),
                q0,
            ).unwrap();
            let mv = mean_var_fixed(&spec, t).unwrap();
            prop_assert!(mv.mean >= 0.0 && mv.variance >= -1e-12);
        }

        #[test]
        fn limit_mgf_is_monotone_in_theta(a in -3.0f64..2.0, b in -3.0f64..2.0, t in 0.1f64..10.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let x = scaled_limit_mgf(lo, t, 1.0, 1.0, 1.0).unwrap();
            let y = scaled_limit_mgf(hi, t, 1.0, 1.0, 1.0).unwrap();
            prop_assert!(x <= y * (1.0 + 1e-12));
        }
    }
}
