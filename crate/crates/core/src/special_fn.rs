//! Scalar special functions: harmonic numbers, Bernoulli numbers, falling
//! factorials, the truncated polylogarithm and the exponential integrals.
//!
//! All functions are pure. Convergence tolerances live in [`tol`].

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Numerical tolerances shared by the special functions.
pub mod tol {
    /// Relative tolerance for the exponential-integral series and continued fraction.
    pub const EXPINT_REL: f64 = 1e-12;
    /// Hard cap on series / continued-fraction iterations.
    pub const EXPINT_MAX_ITER: usize = 10_000;
    /// E1 switches from the power series to the continued fraction above this argument.
    pub const E1_SERIES_MAX_X: f64 = 1.0;
    /// Largest Bernoulli index accepted.
    pub const BERNOULLI_MAX_INDEX: u32 = 40;
}

/// `H_n = 1 + 1/2 + ... + 1/n`. `harmonic(0)` is the empty sum.
pub fn harmonic(n: u64) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// Bernoulli number `B_i` from the double sum
/// `Σ_{k=0..i} Σ_{j=0..k} (-1)^j C(k,j) (j+1)^i / (k+1)`.
///
/// This convention gives `B_1 = +1/2`. The sum is evaluated in exact rational
/// arithmetic and rounded once, so odd indices above 1 come out as exactly 0.
pub fn bernoulli(i: u32) -> Result<f64> {
    if i > tol::BERNOULLI_MAX_INDEX {
        return Err(Error::Domain(format!(
            "bernoulli index {i} exceeds supported maximum {}",
            tol::BERNOULLI_MAX_INDEX
        )));
    }
    let mut total = BigRational::zero();
    for k in 0..=i {
        let mut inner = BigInt::zero();
        let mut binom = BigInt::one();
        for j in 0..=k {
            let term = &binom * num_traits::pow(BigInt::from(j + 1), i as usize);
            if j % 2 == 0 {
                inner += term;
            } else {
                inner -= term;
            }
            binom = binom * BigInt::from(k - j) / BigInt::from(j + 1);
        }
        total += BigRational::new(inner, BigInt::from(k + 1));
    }
    Ok(total.to_f64().unwrap_or(f64::NAN))
}

/// Falling factorial `n (n-1) ... (n-i+1)`; 1 for `i = 0`.
pub fn falling_factorial(n: f64, i: u32) -> f64 {
    (0..i).map(|m| n - m as f64).product()
}

/// Binomial coefficient as a float, exact for the small arguments used here.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for m in 0..k {
        acc = acc * (n - m) as f64 / (m + 1) as f64;
    }
    acc.round()
}

/// Truncated polylogarithm `Li(z, n, s) = Σ_{k=1..n} z^k / k^s`.
pub fn trunc_polylog(z: f64, n: u64, s: f64) -> f64 {
    let mut zk = 1.0;
    let mut acc = 0.0;
    for k in 1..=n {
        zk *= z;
        acc += if s == 1.0 {
            zk / k as f64
        } else {
            zk / (k as f64).powf(s)
        };
    }
    acc
}

/// Exponential integral `Ei(x)` for `x > 0`, from
/// `Ei(x) = γ + ln x + Σ_{k≥1} x^k / (k·k!)`.
pub fn exp_integral_ei(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("Ei requires x > 0, got {x}")));
    }
    // term_k = x^k / k!, accumulated as term_k / k
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..tol::EXPINT_MAX_ITER {
        term *= x / k as f64;
        let contrib = term / k as f64;
        sum += contrib;
        if contrib <= tol::EXPINT_REL * 1e-4 * sum.abs() {
            return Ok(EULER_GAMMA + x.ln() + sum);
        }
    }
    Err(Error::Domain(format!("Ei series did not converge at x = {x}")))
}

/// Exponential integral `E1(x) = ∫_x^∞ e^{-s}/s ds` for `x > 0`.
///
/// Power series `-γ - ln x - Σ (-x)^k/(k·k!)` for small arguments, Lentz
/// continued fraction otherwise.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::Domain(format!("E1 requires x > 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    if x <= tol::E1_SERIES_MAX_X {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..tol::EXPINT_MAX_ITER {
            term *= -x / k as f64;
            let contrib = term / k as f64;
            sum += contrib;
            if contrib.abs() <= tol::EXPINT_REL * 1e-4 {
                return Ok(-EULER_GAMMA - x.ln() - sum);
            }
        }
        return Err(Error::Domain(format!("E1 series did not converge at x = {x}")));
    }
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..tol::EXPINT_MAX_ITER {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() <= tol::EXPINT_REL * 1e-3 {
            return Ok(h * (-x).exp());
        }
    }
    Err(Error::Domain(format!(
        "E1 continued fraction did not converge at x = {x}"
    )))
}

/// `ln(k!)`, exact summation below 256 and Stirling's series above.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 256 {
        return (2..=k).map(|m| (m as f64).ln()).sum();
    }
    let n = k as f64 + 1.0;
    let inv = 1.0 / n;
    let inv2 = inv * inv;
    (n - 0.5) * n.ln() - n
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}
