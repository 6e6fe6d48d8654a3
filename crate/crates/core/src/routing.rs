//! Batch-size probabilities that give every order-statistic sub-queue the
//! same steady-state law.
//!
//! With batches on `{1..k}`, `φ_j = P(B = j)` for `j < k` solves
//! `(M + v vᵀ) φ = v`, `v = 1`, where `M` is upper triangular with
//! `M_{ij} = E[S_(i,j)] / (E[S_(k,k)] - E[S_(i,k)])`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::model::{BatchDist, QueueSpec, RatePattern, ServiceDist};
use crate::simulator::{fmt, replicate_raw, SimConfig, SubqueueMode};
use crate::stats;

/// Denominators at or below this are treated as a degenerate service law.
pub const DEGENERATE_DENOM_TOL: f64 = 1e-12;
/// Relative determinant threshold for a singular system.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Tolerance on the equality of analytic sub-queue means.
pub const EQUAL_MEANS_TOL: f64 = 1e-10;
/// Snapshot time for unbounded service, in units of `E[S_(k,k)]`.
pub const UNBOUNDED_HORIZON_FACTOR: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingProblem {
    pub k: usize,
    pub service: ServiceDist,
    pub lambda: f64,
}

impl RoutingProblem {
    pub fn new(k: usize, service: ServiceDist, lambda: f64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Domain(format!("k must be >= 2, got {k}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Domain("λ must be finite and > 0".into()));
        }
        service.validate()?;
        Ok(Self { k, service, lambda })
    }

    /// `table[j-1][i-1] = E[S_(i,j)]` for `1 ≤ i ≤ j ≤ k`.
    pub fn order_stat_table(&self) -> Vec<Vec<f64>> {
        (1..=self.k).map(|j| self.service.order_stat_means(j)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingSolution {
    /// `φ_1 ..= φ_{k-1}`.
    pub phi: Vec<f64>,
    pub phi_k: f64,
    pub matrix_m: Vec<Vec<f64>>,
    /// All of `(φ, φ_k)` in `[0, 1]` and summing to 1.
    pub feasible: bool,
    /// `‖(M + vvᵀ)φ - v‖_∞`.
    pub residual: f64,
    /// `1 + vᵀ M⁻¹ v`, or `None` when `M` itself is singular.
    pub sherman_morrison: Option<f64>,
}

impl RoutingSolution {
    /// Batch law `P(B = j)` on `{1..k}`. Fails for infeasible solutions.
    pub fn batch(&self) -> Result<BatchDist> {
        if !self.feasible {
            return Err(Error::Domain("routing solution is not a probability vector".into()));
        }
        let mut pmf: Vec<(u64, f64)> = self
            .phi
            .iter()
            .enumerate()
            .map(|(i, &p)| (i as u64 + 1, p.max(0.0)))
            .collect();
        pmf.push((self.phi.len() as u64 + 1, self.phi_k.max(0.0)));
        pmf.retain(|&(_, p)| p > 0.0);
        let total: f64 = pmf.iter().map(|p| p.1).sum();
        pmf.iter_mut().for_each(|p| p.1 /= total);
        BatchDist::empirical(pmf)
    }

    /// `i,phi_i` rows for `i = 1..k`, then `residual` and `feasible`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["i", "phi_i"])?;
        for (i, p) in self.phi.iter().chain(std::iter::once(&self.phi_k)).enumerate() {
            out.write_record([(i + 1).to_string(), fmt(*p)])?;
        }
        out.write_record(["residual".to_string(), fmt(self.residual)])?;
        out.write_record(["feasible".to_string(), self.feasible.to_string()])?;
        out.flush()?;
        Ok(())
    }

    /// Dense `M` with a `row,col1,...` header.
    pub fn write_matrix_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.matrix_m.len();
        let mut header = vec!["row".to_string()];
        header.extend((1..=n).map(|j| format!("col{j}")));
        out.write_record(&header)?;
        for (i, row) in self.matrix_m.iter().enumerate() {
            let mut rec = vec![(i + 1).to_string()];
            rec.extend(row.iter().map(|x| fmt(*x)));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// The upper triangular `(k-1) × (k-1)` matrix `M`.
pub fn build_matrix(problem: &RoutingProblem) -> Result<Vec<Vec<f64>>> {
    let k = problem.k;
    let table = problem.order_stat_table();
    let last = &table[k - 1];
    let top = last[k - 1];
    let mut m = vec![vec![0.0; k - 1]; k - 1];
    for i in 1..k {
        let denom = top - last[i - 1];
        if denom <= DEGENERATE_DENOM_TOL {
            return Err(Error::DegenerateService(format!(
                "E[S_({k},{k})] - E[S_({i},{k})] = {denom:e}"
            )));
        }
        for j in i..k {
            m[i - 1][j - 1] = table[j - 1][i - 1] / denom;
        }
    }
    Ok(m)
}

/// LU with partial pivoting. Returns the solution and `|det|`, or `None`
/// for an exactly singular matrix.
fn lu_solve(a: &[Vec<f64>], b: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = b.len();
    let mut a: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))?;
        if a[piv][col] == 0.0 {
            return None;
        }
        a.swap(col, piv);
        x.swap(col, piv);
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(r);
            for (dst, src) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *dst -= f * src;
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (x[r] - s) / a[r][r];
    }
    Some((x, det.abs()))
}

/// Solves `(M + vvᵀ) φ = v`.
pub fn solve_phi(problem: &RoutingProblem) -> Result<RoutingSolution> {
    let m = build_matrix(problem)?;
    let n = m.len();
    let a: Vec<Vec<f64>> = m.iter().map(|row| row.iter().map(|x| x + 1.0).collect()).collect();
    let v = vec![1.0; n];
    // scale for the relative determinant test: product of row norms
    let scale: f64 = a.iter().map(|row| row.iter().map(|x| x.abs()).fold(0.0, f64::max)).product();
    let (phi, det) = lu_solve(&a, &v).ok_or_else(|| Error::Singular("M + vvᵀ is singular".into()))?;
    if det < SINGULAR_TOL * scale {
        return Err(Error::Singular(format!("|det(M + vvᵀ)| = {det:e}")));
    }
    let residual = a
        .iter()
        .zip(&v)
        .map(|(row, vi)| (row.iter().zip(&phi).map(|(x, p)| x * p).sum::<f64>() - vi).abs())
        .fold(0.0, f64::max);
    let sherman_morrison = lu_solve(&m, &v).map(|(y, _)| 1.0 + y.iter().sum::<f64>());
    let phi_k = 1.0 - phi.iter().sum::<f64>();
    let feasible = phi.iter().chain(std::iter::once(&phi_k)).all(|p| (0.0..=1.0).contains(p));
    Ok(RoutingSolution { phi, phi_k, matrix_m: m, feasible, residual, sherman_morrison })
}

/// `E[Q_i] = λ Σ_{j ≥ i} P(B = j) E[S_(i,j)]` for each sub-queue.
pub fn subqueue_means(problem: &RoutingProblem, solution: &RoutingSolution) -> Vec<f64> {
    let table = problem.order_stat_table();
    let probs: Vec<f64> = solution.phi.iter().copied().chain(std::iter::once(solution.phi_k)).collect();
    (1..=problem.k)
        .map(|i| {
            problem.lambda * (i..=problem.k).map(|j| probs[j - 1] * table[j - 1][i - 1]).sum::<f64>()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimBudget {
    pub replications: usize,
    pub base_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSubqueue {
    pub queue: usize,
    pub mean: f64,
    pub variance: f64,
    pub se: f64,
    /// `(variance - mean) / se` for the Poisson check.
    pub poisson_z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub analytic_means: Vec<f64>,
    pub analytic_equal: bool,
    /// Time at which the simulated system is observed.
    pub snapshot: f64,
    /// Empty when the solution is infeasible and simulation was skipped.
    pub simulated: Vec<SimulatedSubqueue>,
    /// Largest `|mean_i - mean_j| / se(Q_i - Q_j)` over pairs.
    pub max_pairwise_z: Option<f64>,
}

impl VerificationReport {
    /// `i,analytic_mean,sim_mean,sim_variance,sim_se,poisson_z`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["i", "analytic_mean", "sim_mean", "sim_variance", "sim_se", "poisson_z"])?;
        for (i, a) in self.analytic_means.iter().enumerate() {
            let rec = match self.simulated.get(i) {
                Some(s) => vec![(i + 1).to_string(), fmt(*a), fmt(s.mean), fmt(s.variance), fmt(s.se), fmt(s.poisson_z)],
                None => vec![(i + 1).to_string(), fmt(*a), "NaN".into(), "NaN".into(), "NaN".into(), "NaN".into()],
            };
            out.write_record(&rec)?;
        }
        out.write_record(["max_pairwise_z".to_string(), self.max_pairwise_z.map_or("NaN".into(), fmt), String::new(), String::new(), String::new(), String::new()])?;
        out.flush()?;
        Ok(())
    }
}

/// Checks the analytic means and, for a feasible solution, simulates the
/// `M^B/G/∞` system with modulo-cap routing in steady state.
pub fn verify_equalization(
    problem: &RoutingProblem,
    solution: &RoutingSolution,
    budget: SimBudget,
) -> Result<VerificationReport> {
    let analytic_means = subqueue_means(problem, solution);
    let lo = analytic_means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = analytic_means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let analytic_equal = hi - lo <= EQUAL_MEANS_TOL * hi.abs().max(1.0);
    let top = problem.service.order_stat_means(problem.k)[problem.k - 1];
    let snapshot = match problem.service.support_max() {
        Some(smax) => smax * 1.5,
        None => UNBOUNDED_HORIZON_FACTOR * top,
    };
    let mut report = VerificationReport {
        analytic_means,
        analytic_equal,
        snapshot,
        simulated: Vec::new(),
        max_pairwise_z: None,
    };
    if !solution.feasible || budget.replications < 2 {
        return Ok(report);
    }
    let spec = QueueSpec::new(
        RatePattern::stationary(problem.lambda)?,
        solution.batch()?,
        problem.service.clone(),
        0,
    )?;
    let config = SimConfig {
        spec,
        horizon: snapshot,
        snapshot_times: vec![snapshot],
        replications: budget.replications,
        base_seed: budget.base_seed,
        subqueue_mode: SubqueueMode::ModuloCap(problem.k),
    };
    let data = replicate_raw(&config)?;
    let cols: Vec<Vec<f64>> = (0..problem.k).map(|q| data.subqueue_f64(0, q)).collect();
    for (q, xs) in cols.iter().enumerate() {
        let mean = stats::mean(xs);
        let variance = stats::variance(xs);
        let se = stats::std_error(xs).unwrap_or(f64::NAN);
        // Z_r = (X_r - x̄)² - X_r has mean ≈ Var - E under the null
        let zs: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2) - x).collect();
        let se_z = stats::std_error(&zs).unwrap_or(f64::NAN);
        report.simulated.push(SimulatedSubqueue {
            queue: q + 1,
            mean,
            variance,
            se,
            poisson_z: (variance - mean) / se_z,
        });
    }
    let mut max_z: f64 = 0.0;
    for i in 0..cols.len() {
        for j in i + 1..cols.len() {
            let diff: Vec<f64> = cols[i].iter().zip(&cols[j]).map(|(a, b)| a - b).collect();
            let se = stats::std_error(&diff).unwrap_or(f64::NAN);
            let z = stats::mean(&diff).abs() / se;
            if z.is_finite() {
                max_z = max_z.max(z);
            }
        }
    }
    report.max_pairwise_z = Some(max_z);
    Ok(report)
}
