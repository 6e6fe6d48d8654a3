//! Sample statistics used by the replication harness and the test suites.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; `None` for fewer than two points.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

/// Like [`sample_variance`] but NaN instead of `None`.
pub fn variance(xs: &[f64]) -> f64 {
    sample_variance(xs).unwrap_or(f64::NAN)
}

/// Standard error of the mean.
pub fn std_error(xs: &[f64]) -> Option<f64> {
    sample_variance(xs).map(|v| (v / xs.len() as f64).sqrt())
}

pub fn covariance(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(xs), mean(ys));
    let s: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(s / (xs.len() - 1) as f64)
}

pub fn correlation(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let c = covariance(xs, ys)?;
    let d = (sample_variance(xs)? * sample_variance(ys)?).sqrt();
    if d > 0.0 {
        Some(c / d)
    } else {
        None
    }
}

/// Sample skewness `m3 / m2^{3/2}` from central moments.
pub fn skewness(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let n = xs.len() as f64;
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - m).powi(3)).sum::<f64>() / n;
    m3 / m2.powf(1.5)
}

/// Delete-one jackknife standard error of `stat`, computed over `groups`
/// contiguous blocks of the paired samples.
pub fn jackknife_se<F>(xs: &[f64], ys: &[f64], groups: usize, stat: F) -> Option<f64>
where
    F: Fn(&[f64], &[f64]) -> Option<f64>,
{
    let n = xs.len();
    let g = groups.min(n);
    if g < 2 {
        return None;
    }
    let mut estimates = Vec::with_capacity(g);
    let mut xa = Vec::with_capacity(n);
    let mut ya = Vec::with_capacity(n);
    for b in 0..g {
        let (lo, hi) = (b * n / g, (b + 1) * n / g);
        xa.clear();
        ya.clear();
        xa.extend_from_slice(&xs[..lo]);
        xa.extend_from_slice(&xs[hi..]);
        ya.extend_from_slice(&ys[..lo]);
        ya.extend_from_slice(&ys[hi..]);
        estimates.push(stat(&xa, &ya)?);
    }
    let m = mean(&estimates);
    let gf = g as f64;
    let ss: f64 = estimates.iter().map(|e| (e - m) * (e - m)).sum();
    Some(((gf - 1.0) / gf * ss).sqrt())
}

/// Normalized histogram of nonnegative integer samples.
pub fn histogram(xs: &[u64]) -> Vec<f64> {
    let max = xs.iter().copied().max().unwrap_or(0) as usize;
    let mut h = vec![0.0; max + 1];
    for &x in xs {
        h[x as usize] += 1.0;
    }
    let n = xs.len() as f64;
    h.iter_mut().for_each(|v| *v /= n);
    h
}

/// Total-variation distance `½ Σ |p_i - q_i|`, missing entries read as 0.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    let len = p.len().max(q.len());
    0.5 * (0..len)
        .map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}
