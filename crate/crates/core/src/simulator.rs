//! Replication-based simulation of `M_t^N/G/∞` with optional sub-queue
//! routing.
//!
//! Every entity is an interval `[s, s + S)`; a snapshot at `t` counts the
//! intervals containing `t`. Replication `r` is seeded with `base_seed + r`
//! through ChaCha8, so results do not depend on thread count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BatchSampler, QueueSpec};
use crate::stats;

/// Blocks used for the jackknife standard error of correlations.
pub const CORR_JACKKNIFE_GROUPS: usize = 100;
/// Largest θ accepted by [`transient_mgf_estimate`].
pub const MGF_THETA_MAX: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubqueueMode {
    None,
    /// Batch member `i` (in draw order) goes to sub-queue `i`.
    Identical,
    /// The i-th shortest service in a batch goes to sub-queue `i`; batches
    /// may not exceed `k`.
    OrderStat(usize),
    /// The i-th shortest service goes to sub-queue `(i - 1) mod k`, so a batch
    /// of size `b ≤ k` only feeds sub-queues `1..=b`.
    ModuloCap(usize),
}

impl SubqueueMode {
    /// Number of sub-queues for a spec, 0 when routing is off.
    pub fn width(&self, spec: &QueueSpec) -> usize {
        match *self {
            SubqueueMode::None => 0,
            SubqueueMode::Identical => spec.batch.max_size() as usize,
            SubqueueMode::OrderStat(k) | SubqueueMode::ModuloCap(k) => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub spec: QueueSpec,
    pub horizon: f64,
    /// Sorted ascending, within `[0, horizon]`.
    pub snapshot_times: Vec<f64>,
    pub replications: usize,
    pub base_seed: u64,
    pub subqueue_mode: SubqueueMode,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        validate_run(&self.spec, self.horizon, &self.snapshot_times, self.subqueue_mode)?;
        if self.replications == 0 {
            return Err(Error::SimConfig("replications must be >= 1".into()));
        }
        Ok(())
    }
}

fn validate_run(spec: &QueueSpec, horizon: f64, times: &[f64], mode: SubqueueMode) -> Result<()> {
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::SimConfig(format!("horizon must be finite and >= 0, got {horizon}")));
    }
    if times.is_empty() {
        return Err(Error::SimConfig("no snapshot times".into()));
    }
    if times.iter().any(|t| !(*t >= 0.0 && *t <= horizon)) {
        return Err(Error::SimConfig("snapshot times must lie in [0, horizon]".into()));
    }
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::SimConfig("snapshot times must be sorted".into()));
    }
    spec.batch.validate()?;
    spec.service.validate()?;
    match mode {
        SubqueueMode::OrderStat(k) | SubqueueMode::ModuloCap(k) if k == 0 => {
            Err(Error::SimConfig("sub-queue count must be >= 1".into()))
        }
        SubqueueMode::OrderStat(k) if spec.batch.max_size() > k as u64 => Err(Error::SimConfig(format!(
            "order-statistic routing over {k} sub-queues cannot take batches up to {}",
            spec.batch.max_size()
        ))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub count: u64,
    /// Per sub-queue counts; initial entities are never routed.
    pub subqueues: Vec<u64>,
}

struct Engine<'a> {
    spec: &'a QueueSpec,
    batch: BatchSampler,
    times: &'a [f64],
    mode: SubqueueMode,
    width: usize,
    start: f64,
    bound: f64,
}

impl<'a> Engine<'a> {
    fn new(spec: &'a QueueSpec, times: &'a [f64], mode: SubqueueMode) -> Self {
        // arrivals earlier than this cannot be seen by any snapshot
        let start = match spec.service.support_max() {
            Some(smax) => (times[0] - smax).max(0.0),
            None => 0.0,
        };
        Self {
            spec,
            batch: BatchSampler::new(&spec.batch),
            times,
            mode,
            width: mode.width(spec),
            start,
            bound: spec.rate.rate_bound(),
        }
    }

    fn record(&self, s: f64, e: f64, queue: Option<usize>, counts: &mut [u64], subs: &mut [u64]) {
        let mut i = self.times.partition_point(|&t| t < s);
        while i < self.times.len() && self.times[i] < e {
            counts[i] += 1;
            if let Some(q) = queue {
                subs[i * self.width + q] += 1;
            }
            i += 1;
        }
    }

    /// Counts per snapshot and a row-major `snapshot × sub-queue` matrix.
    fn run(&self, seed: u64) -> (Vec<u64>, Vec<u64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = self.times.len();
        let mut counts = vec![0u64; m];
        let mut subs = vec![0u64; m * self.width];
        let service = &self.spec.service;

        for _ in 0..self.spec.q0 {
            let d = service.sample(&mut rng);
            self.record(0.0, d, None, &mut counts, &mut subs);
        }

        let end = self.times[m - 1];
        let stationary = self.spec.rate.is_stationary();
        let mut draws: Vec<f64> = Vec::new();
        let mut t = self.start;
        if self.bound > 0.0 {
            loop {
                let gap: f64 = rng.sample(Exp1);
                t += gap / self.bound;
                if t > end {
                    break;
                }
                if !stationary && rng.random::<f64>() * self.bound > self.spec.rate.rate_at(t) {
                    continue;
                }
                let size = self.batch.sample(&mut rng) as usize;
                draws.clear();
                draws.extend((0..size).map(|_| service.sample(&mut rng)));
                match self.mode {
                    SubqueueMode::None => {
                        for &d in &draws {
                            self.record(t, t + d, None, &mut counts, &mut subs);
                        }
                    }
                    SubqueueMode::Identical => {
                        for (i, &d) in draws.iter().enumerate() {
                            self.record(t, t + d, Some(i), &mut counts, &mut subs);
                        }
                    }
                    SubqueueMode::OrderStat(_) | SubqueueMode::ModuloCap(_) => {
                        // stable sort keeps draw order among ties
                        draws.sort_by(f64::total_cmp);
                        for (i, &d) in draws.iter().enumerate() {
                            self.record(t, t + d, Some(i % self.width), &mut counts, &mut subs);
                        }
                    }
                }
            }
        }
        (counts, subs)
    }
}

/// One replication.
pub fn simulate_one(
    spec: &QueueSpec,
    horizon: f64,
    snapshot_times: &[f64],
    mode: SubqueueMode,
    seed: u64,
) -> Result<Vec<Snapshot>> {
    validate_run(spec, horizon, snapshot_times, mode)?;
    let engine = Engine::new(spec, snapshot_times, mode);
    let (counts, subs) = engine.run(seed);
    let w = engine.width;
    Ok(snapshot_times
        .iter()
        .enumerate()
        .map(|(i, &time)| Snapshot {
            time,
            count: counts[i],
            subqueues: subs[i * w..(i + 1) * w].to_vec(),
        })
        .collect())
}

/// Raw per-replication counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationData {
    pub times: Vec<f64>,
    pub width: usize,
    /// `counts[snapshot][replication]`.
    pub counts: Vec<Vec<u64>>,
    /// `subqueues[snapshot][queue][replication]`.
    pub subqueues: Vec<Vec<Vec<u64>>>,
}

impl ReplicationData {
    pub fn replications(&self) -> usize {
        self.counts.first().map_or(0, Vec::len)
    }

    pub fn counts_f64(&self, snapshot: usize) -> Vec<f64> {
        self.counts[snapshot].iter().map(|&c| c as f64).collect()
    }

    pub fn subqueue_f64(&self, snapshot: usize, queue: usize) -> Vec<f64> {
        self.subqueues[snapshot][queue].iter().map(|&c| c as f64).collect()
    }
}

/// Runs every replication (in parallel, deterministic order) and keeps the
/// raw counts.
pub fn replicate_raw(config: &SimConfig) -> Result<ReplicationData> {
    config.validate()?;
    let engine = Engine::new(&config.spec, &config.snapshot_times, config.subqueue_mode);
    let runs: Vec<(Vec<u64>, Vec<u64>)> = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| engine.run(config.base_seed.wrapping_add(r)))
        .collect();
    let m = config.snapshot_times.len();
    let w = engine.width;
    let mut counts = vec![Vec::with_capacity(runs.len()); m];
    let mut subqueues = vec![vec![Vec::with_capacity(runs.len()); w]; m];
    for (c, s) in &runs {
        for i in 0..m {
            counts[i].push(c[i]);
            for q in 0..w {
                subqueues[i][q].push(s[i * w + q]);
            }
        }
    }
    Ok(ReplicationData { times: config.snapshot_times.clone(), width: w, counts, subqueues })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotStats {
    pub time: f64,
    pub mean: f64,
    /// `None` with a single replication.
    pub variance: Option<f64>,
    pub se: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubqueueStats {
    pub time: f64,
    pub queue: usize,
    pub mean: f64,
    pub variance: Option<f64>,
    pub se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairStats {
    pub time: f64,
    pub i: usize,
    pub j: usize,
    pub cov: Option<f64>,
    pub corr: Option<f64>,
    /// Jackknife standard error of `corr`.
    pub corr_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepSummary {
    pub snapshots: Vec<SnapshotStats>,
    pub subqueues: Vec<SubqueueStats>,
    pub pairs: Vec<PairStats>,
}

fn moment_stats(xs: &[f64]) -> (f64, Option<f64>, Option<f64>) {
    (stats::mean(xs), stats::sample_variance(xs), stats::std_error(xs))
}

/// Delete-a-group jackknife for the Pearson correlation using block sums.
fn corr_jackknife(xs: &[f64], ys: &[f64], groups: usize) -> Option<f64> {
    let n = xs.len();
    let g = groups.min(n);
    if g < 2 {
        return None;
    }
    let mut blocks = vec![[0.0f64; 5]; g];
    for (b, s) in blocks.iter_mut().enumerate() {
        for k in b * n / g..(b + 1) * n / g {
            let (x, y) = (xs[k], ys[k]);
            s[0] += x;
            s[1] += y;
            s[2] += x * x;
            s[3] += y * y;
            s[4] += x * y;
        }
    }
    let mut total = [0.0f64; 5];
    for s in &blocks {
        for (t, x) in total.iter_mut().zip(s) {
            *t += x;
        }
    }
    let mut est = Vec::with_capacity(g);
    for (b, block) in blocks.iter().enumerate() {
        let size = ((b + 1) * n / g - b * n / g) as f64;
        let m = n as f64 - size;
        let s: Vec<f64> = total.iter().zip(block).map(|(t, x)| t - x).collect();
        let vx = s[2] - s[0] * s[0] / m;
        let vy = s[3] - s[1] * s[1] / m;
        let cxy = s[4] - s[0] * s[1] / m;
        if vx <= 0.0 || vy <= 0.0 {
            return None;
        }
        est.push(cxy / (vx * vy).sqrt());
    }
    let mean = stats::mean(&est);
    let gf = g as f64;
    Some(((gf - 1.0) / gf * est.iter().map(|e| (e - mean).powi(2)).sum::<f64>()).sqrt())
}

impl RepSummary {
    pub fn from_data(data: &ReplicationData) -> Self {
        let mut snapshots = Vec::new();
        let mut subqueues = Vec::new();
        let mut pairs = Vec::new();
        for (s, &time) in data.times.iter().enumerate() {
            let xs = data.counts_f64(s);
            let (mean, variance, se) = moment_stats(&xs);
            snapshots.push(SnapshotStats { time, mean, variance, se, count: xs.len() });
            let cols: Vec<Vec<f64>> = (0..data.width).map(|q| data.subqueue_f64(s, q)).collect();
            for (q, col) in cols.iter().enumerate() {
                let (mean, variance, se) = moment_stats(col);
                subqueues.push(SubqueueStats { time, queue: q + 1, mean, variance, se });
            }
            for i in 0..cols.len() {
                for j in i + 1..cols.len() {
                    pairs.push(PairStats {
                        time,
                        i: i + 1,
                        j: j + 1,
                        cov: stats::covariance(&cols[i], &cols[j]),
                        corr: stats::correlation(&cols[i], &cols[j]),
                        corr_se: corr_jackknife(&cols[i], &cols[j], CORR_JACKKNIFE_GROUPS),
                    });
                }
            }
        }
        Self { snapshots, subqueues, pairs }
    }

    /// `t,mean,variance,se,count`; undefined values are written as `NaN`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "mean", "variance", "se", "count"])?;
        for s in &self.snapshots {
            out.write_record([
                fmt(s.time),
                fmt(s.mean),
                fmt_opt(s.variance),
                fmt_opt(s.se),
                s.count.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// `t,i,j,cov,corr`.
    pub fn write_pairs_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "i", "j", "cov", "corr"])?;
        for p in &self.pairs {
            out.write_record([fmt(p.time), p.i.to_string(), p.j.to_string(), fmt_opt(p.cov), fmt_opt(p.corr)])?;
        }
        out.flush()?;
        Ok(())
    }

    /// `t,i,mean,variance,se`.
    pub fn write_subqueue_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "i", "mean", "variance", "se"])?;
        for s in &self.subqueues {
            out.write_record([fmt(s.time), s.queue.to_string(), fmt(s.mean), fmt_opt(s.variance), fmt_opt(s.se)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Fixed 17-significant-digit formatting shared by every CSV writer.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NaN".to_string(), fmt)
}

pub fn replicate(config: &SimConfig) -> Result<RepSummary> {
    Ok(RepSummary::from_data(&replicate_raw(config)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfEstimate {
    pub time: f64,
    pub estimate: f64,
    pub se: f64,
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > MGF_THETA_MAX || !theta.is_finite() {
        Err(Error::Domain(format!("θ must be finite and <= {MGF_THETA_MAX}, got {theta}")))
    } else {
        Ok(())
    }
}

/// Sample mean of `e^{θ Q_t}` per snapshot from existing replication data.
///
/// The delete-one jackknife standard error of a sample mean is exactly
/// `sqrt(s²/R)`, which is what is returned.
pub fn mgf_estimate_from(data: &ReplicationData, theta: f64) -> Result<Vec<MgfEstimate>> {
    check_theta(theta)?;
    Ok(data
        .times
        .iter()
        .enumerate()
        .map(|(s, &time)| {
            let ys: Vec<f64> = data.counts[s].iter().map(|&c| (theta * c as f64).exp()).collect();
            MgfEstimate {
                time,
                estimate: stats::mean(&ys),
                se: stats::std_error(&ys).unwrap_or(0.0),
            }
        })
        .collect())
}

pub fn transient_mgf_estimate(config: &SimConfig, theta: f64) -> Result<Vec<MgfEstimate>> {
    check_theta(theta)?;
    mgf_estimate_from(&replicate_raw(config)?, theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic;
    use crate::model::{BatchDist, RatePattern, ServiceDist};

    fn config(spec: QueueSpec, times: Vec<f64>, reps: usize, mode: SubqueueMode) -> SimConfig {
        let horizon = times.last().copied().unwrap_or(0.0);
        SimConfig { spec, horizon, snapshot_times: times, replications: reps, base_seed: 1000, subqueue_mode: mode }
    }

    #[test]
    fn initial_state_at_time_zero() {
        let spec = QueueSpec::markov_fixed(1e-9, 1.0, 1, 5).unwrap();
        let snaps = simulate_one(&spec, 1.0, &[0.0], SubqueueMode::None, 7).unwrap();
        assert_eq!(snaps[0].count, 5);
    }

    #[test]
    fn mm_inf_steady_mean() {
        let spec = QueueSpec::markov_fixed(1.0, 1.0, 1, 0).unwrap();
        let s = replicate(&config(spec, vec![20.0], 100_000, SubqueueMode::None)).unwrap();
        let snap = &s.snapshots[0];
        assert!((snap.mean - 1.0).abs() < 3.0 * snap.se.unwrap());
    }

    #[test]
    fn fixed_batch_steady_moments() {
        let spec = QueueSpec::markov_fixed(1.0, 1.0, 2, 0).unwrap();
        let data = replicate_raw(&config(spec, vec![20.0], 100_000, SubqueueMode::None)).unwrap();
        let xs = data.counts_f64(0);
        let m = stats::mean(&xs);
        let v = stats::variance(&xs);
        let se_m = stats::std_error(&xs).unwrap();
        // standard error of the sample variance from the fourth central moment
        let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / xs.len() as f64;
        let se_v = ((m4 - v * v) / xs.len() as f64).sqrt();
        assert!((m - 2.0).abs() < 3.0 * se_m, "mean {m}");
        assert!((v - 3.0).abs() < 3.0 * se_v, "variance {v}");
    }

    #[test]
    fn periodic_mean_tracks_closed_form() {
        let spec = QueueSpec::new(
            RatePattern::new(2.0, vec![1.0], vec![]).unwrap(),
            BatchDist::fixed(1).unwrap(),
            ServiceDist::exponential(1.0).unwrap(),
            0,
        )
        .unwrap();
        let times = vec![28.0, 29.0, 30.0];
        let s = replicate(&config(spec.clone(), times.clone(), 50_000, SubqueueMode::None)).unwrap();
        for (snap, &t) in s.snapshots.iter().zip(&times) {
            let want = analytic::mean_var_fixed(&spec, t).unwrap().mean;
            assert!((snap.mean - want).abs() < 3.0 * snap.se.unwrap(), "t={t}: {} vs {want}", snap.mean);
        }
    }

    #[test]
    fn single_replication_flags_undefined_se() {
        let spec = QueueSpec::markov_fixed(1.0, 1.0, 1, 0).unwrap();
        let s = replicate(&config(spec, vec![1.0], 1, SubqueueMode::None)).unwrap();
        assert_eq!(s.snapshots[0].se, None);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("NaN"));
    }

    #[test]
    fn identical_routing_partitions_total() {
        let spec = QueueSpec::markov_fixed(2.0, 1.0, 3, 0).unwrap();
        for seed in 0..50 {
            let snaps = simulate_one(&spec, 5.0, &[0.5, 2.0, 5.0], SubqueueMode::Identical, seed).unwrap();
            for s in snaps {
                assert_eq!(s.subqueues.len(), 3);
                assert_eq!(s.subqueues.iter().sum::<u64>(), s.count);
            }
        }
    }

    #[test]
    fn identical_routing_correlation() {
        let spec = QueueSpec::markov_fixed(1.0, 1.0, 2, 0).unwrap();
        let s = replicate(&config(spec, vec![20.0], 100_000, SubqueueMode::Identical)).unwrap();
        let p = &s.pairs[0];
        assert!((p.corr.unwrap() - 0.5).abs() < 0.02);
        assert!(p.corr_se.unwrap() > 0.0 && p.corr_se.unwrap() < 0.01);
    }

    #[test]
    fn order_stat_means_exponential() {
        let (lambda, mu, n) = (1.5, 1.0, 3u64);
        let spec = QueueSpec::markov_fixed(lambda, mu, n, 0).unwrap();
        let s = replicate(&config(spec.clone(), vec![25.0], 50_000, SubqueueMode::OrderStat(3))).unwrap();
        let means = spec.service.order_stat_means(n as usize);
        for (q, m) in s.subqueues.iter().zip(means) {
            let want = lambda * m;
            assert!((q.mean - want).abs() < 3.0 * q.se.unwrap(), "queue {}: {} vs {want}", q.queue, q.mean);
        }
    }

    #[test]
    fn order_stat_rejects_large_batches() {
        let spec = QueueSpec::markov_fixed(1.0, 1.0, 4, 0).unwrap();
        let cfg = config(spec, vec![1.0], 10, SubqueueMode::OrderStat(3));
        assert!(matches!(replicate(&cfg), Err(Error::SimConfig(_))));
    }

    #[test]
    fn config_validation() {
        let spec = QueueSpec::markov_fixed(1.0, 1.0, 1, 0).unwrap();
        let mut cfg = config(spec, vec![1.0, 0.5], 10, SubqueueMode::None);
        assert!(cfg.validate().is_err());
        cfg.snapshot_times = vec![0.5, 2.0];
        cfg.horizon = 1.0;
        assert!(cfg.validate().is_err());
        cfg.horizon = 2.0;
        cfg.replications = 0;
        assert!(cfg.validate().is_err());
        cfg.replications = 1;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn modulo_cap_feeds_only_present_positions() {
        let spec = QueueSpec::new(
            RatePattern::stationary(1.0).unwrap(),
            BatchDist::empirical(vec![(1, 0.5), (2, 0.5)]).unwrap(),
            ServiceDist::uniform(1.0).unwrap(),
            0,
        )
        .unwrap();
        let data = replicate_raw(&config(spec, vec![10.0], 20_000, SubqueueMode::ModuloCap(2))).unwrap();
        for r in 0..data.replications() {
            assert_eq!(data.subqueues[0][0][r] + data.subqueues[0][1][r], data.counts[0][r]);
        }
        // E[Q_1] = λ(0.5·E[S_(1,1)] + 0.5·E[S_(1,2)]) = 0.5·0.5 + 0.5/3
        let m1 = stats::mean(&data.subqueue_f64(0, 0));
        let se1 = stats::std_error(&data.subqueue_f64(0, 0)).unwrap();
        assert!((m1 - (0.25 + 0.5 / 3.0)).abs() < 4.0 * se1);
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let spec = QueueSpec::new(
            RatePattern::new(2.0, vec![0.5], vec![0.5]).unwrap(),
            BatchDist::empirical(vec![(1, 0.3), (3, 0.7)]).unwrap(),
            ServiceDist::exponential(1.0).unwrap(),
            2,
        )
        .unwrap();
        let cfg = config(spec, vec![1.0, 3.0], 500, SubqueueMode::Identical);
        let a = replicate_raw(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| replicate_raw(&cfg)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mgf_estimate_guards() {
        let spec = QueueSpec::markov_fixed(1.0, 1.0, 2, 0).unwrap();
        let cfg = config(spec, vec![10.0], 1000, SubqueueMode::None);
        assert!(transient_mgf_estimate(&cfg, 1.5).is_err());
        let est = transient_mgf_estimate(&cfg, 0.0).unwrap();
        assert_eq!((est[0].estimate, est[0].se), (1.0, 0.0));
    }

    #[test]
    fn mgf_estimate_matches_closed_form() {
        let spec = QueueSpec::markov_fixed(1.0, 1.0, 2, 0).unwrap();
        let est = transient_mgf_estimate(&config(spec.clone(), vec![10.0], 100_000, SubqueueMode::None), 0.3).unwrap();
        let want = analytic::transient_mgf_fixed(&spec, 0.3, 10.0).unwrap();
        assert!((est[0].estimate - want).abs() < 3.0 * est[0].se);
        let spec3 = QueueSpec::markov_fixed(1.0, 1.0, 3, 0).unwrap();
        let est = transient_mgf_estimate(&config(spec3, vec![30.0], 100_000, SubqueueMode::None), -1.0).unwrap();
        let want = analytic::steady_mgf_polylog_form(3, 1.0, 1.0, -1.0);
        assert!((est[0].estimate - want).abs() < 3.0 * est[0].se);
    }

    #[test]
    fn doubling_replications_shrinks_se() {
        let spec = QueueSpec::markov_fixed(1.0, 1.0, 2, 0).unwrap();
        let a = replicate(&config(spec.clone(), vec![10.0], 20_000, SubqueueMode::None)).unwrap();
        let b = replicate(&config(spec, vec![10.0], 40_000, SubqueueMode::None)).unwrap();
        let ratio = a.snapshots[0].se.unwrap() / b.snapshots[0].se.unwrap();
        assert!((ratio - 2f64.sqrt()).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn corr_jackknife_matches_generic() {
        let xs: Vec<f64> = (0..400).map(|i| ((i * 7919) % 13) as f64).collect();
        let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x + ((i * 31) % 5) as f64).collect();
        let fast = corr_jackknife(&xs, &ys, 40).unwrap();
        let slow = stats::jackknife_se(&xs, &ys, 40, stats::correlation).unwrap();
        assert!((fast - slow).abs() < 1e-10);
    }
}
