//! Convergence-rate experiment harness.
//!
//! A rate study sweeps a grid of `(n, r)` design points. At each point it
//! repeatedly simulates a dataset from the ground-truth model, fits the
//! penalized estimator with the rate-optimal penalty (optionally tuned over
//! a small multiplier sweep), and estimates the squared L2 distance to the
//! truth by Monte Carlo integration. The log-log slope of error against `n`
//! at fixed `r` is then compared to the theoretical exponent
//! `-2p / (2p + d)`.
//!
//! Replications run in parallel; every random stream is seeded by a
//! documented hash of the master seed and the design-point values, so
//! results are bit-identical no matter how work is scheduled or how the
//! grid is ordered.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{CovEstimate, Fitter, PairDesign};
use crate::kernel::ZonalKernel;
use crate::simulate::{CovModel, NoiseSpec};

/// Harmonic mean of the per-subject measurement counts.
pub fn harmonic_mean(counts: &[usize]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::Config("harmonic mean of an empty list".into()));
    }
    if let Some(&bad) = counts.iter().find(|&&r| r < 2) {
        return Err(Error::Config(format!(
            "measurement counts must be at least 2, got {bad}"
        )));
    }
    let inv_sum: f64 = counts.iter().map(|&r| 1.0 / r as f64).sum();
    Ok(counts.len() as f64 / inv_sum)
}

/// Rate-optimal penalty `c0 * (n r / ln n)^(-2p / (2p + d))`.
pub fn rate_optimal_eta(n: usize, r: f64, p: f64, d: usize, c0: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain {
            value: n as f64,
            domain: "n >= 2 (log n must be positive)",
        });
    }
    let exponent = -2.0 * p / (2.0 * p + d as f64);
    Ok(c0 * (n as f64 * r / (n as f64).ln()).powf(exponent))
}

/// Compensated (Kahan) accumulator for order-insensitive means.
#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

/// Monte Carlo estimate of the squared L2 distance between a fitted
/// covariance and the truth: Q independent uniform pairs `(U, V)`, averaged
/// squared difference. The normalized measure makes this an unbiased
/// estimate of the squared norm; returns (mean, standard error).
pub fn mc_l2_error<R: Rng + ?Sized>(
    est: &CovEstimate,
    model: &CovModel,
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if samples < 100 {
        return Err(Error::Config(format!(
            "at least 100 Monte Carlo samples are required, got {samples}"
        )));
    }
    let space = *model.space();
    if est.kernel().params().kind != space.kind || est.kernel().params().dim != space.dim {
        return Err(Error::SpaceMismatch(
            est.kernel().params().kind.name(),
            space.kind.name(),
        ));
    }
    let mut sum = Kahan::default();
    let mut sum_sq = Kahan::default();
    for _ in 0..samples {
        let pair = space.sample_uniform(2, rng)?;
        let diff = est.predict(&pair[0], &pair[1])? - model.cov(&pair[0], &pair[1])?;
        let sq = diff * diff;
        sum.add(sq);
        sum_sq.add(sq * sq);
    }
    let q = samples as f64;
    let mean = sum.value() / q;
    let var = (sum_sq.value() / q - mean * mean).max(0.0) * q / (q - 1.0);
    Ok((mean, (var / q).sqrt()))
}

/// Splitmix64 mixing step.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream tags for derived seeds.
const STREAM_SIMULATION: u64 = 1;
const STREAM_ERROR_EVAL: u64 = 2;

/// Derives the seed of one random stream from the master seed, the design
/// point values, and the replication index, by chained splitmix64 mixing.
/// Keying on values (not grid position) makes results independent of grid
/// order and scheduling.
pub fn derive_seed(master: u64, n: u64, r: u64, replication: u64, stream: u64) -> u64 {
    let mut h = splitmix64(master);
    h = splitmix64(h ^ n);
    h = splitmix64(h ^ r.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    h = splitmix64(h ^ replication);
    splitmix64(h ^ stream)
}

/// One grid point of a rate study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DesignPoint {
    pub n: usize,
    pub r: usize,
}

/// Penalty selection rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRule {
    /// `eta = c0 (n r / log n)^(-2p/(2p+d))`.
    RateOptimal { c0: f64 },
    /// A fixed penalty at every design point.
    Fixed { eta: f64 },
}

/// Full configuration of a rate study.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub model: CovModel,
    pub noise: NoiseSpec,
    /// Sobolev order `p` of the penalty; the rate regime requires `p > d`.
    pub sobolev_order: f64,
    /// Absolute tolerance for the kernel truncation.
    pub truncation_tol: f64,
    pub grid: Vec<DesignPoint>,
    pub replications: usize,
    pub eta_rule: EtaRule,
    /// Optional multiplier sweep; the best value per design point (smallest
    /// mean error) enters the reported row and the slope fit. Only
    /// meaningful with [`EtaRule::RateOptimal`].
    pub c0_sweep: Option<Vec<f64>>,
    /// Monte Carlo sample count for the L2 error.
    pub error_samples: usize,
    pub seed: u64,
}

/// Per-candidate diagnostics at one design point (the penalty-sensitivity
/// log of the sweep).
#[derive(Debug, Clone, Serialize)]
pub struct CandidateStats {
    pub c0: Option<f64>,
    pub eta: f64,
    pub mean_sq_error: f64,
    pub std_error: f64,
}

/// Aggregated results at one design point.
#[derive(Debug, Clone, Serialize)]
pub struct RatePoint {
    pub n: usize,
    pub r: usize,
    /// Penalty of the selected candidate.
    pub eta: f64,
    /// Multiplier of the selected candidate (absent for fixed-eta rules).
    pub c0: Option<f64>,
    pub mean_sq_error: f64,
    /// Standard error of the mean over replications.
    pub std_error: f64,
    /// All sweep candidates, for penalty-sensitivity diagnostics.
    pub sweep: Vec<CandidateStats>,
}

/// Log-log slope fit of error against `n`.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlopeFit {
    Fitted { slope: f64 },
    /// Errors at or below the degeneracy floor (exact-recovery regimes);
    /// a log-log fit would be meaningless.
    Degenerate,
}

/// Mean errors this small are treated as exact recovery.
pub const DEGENERATE_ERROR_FLOOR: f64 = 1e-12;

/// Half-width of the acceptance band around the theoretical exponent.
pub const SLOPE_BAND_HALF_WIDTH: f64 = 0.3;

/// Results of a rate study.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub points: Vec<RatePoint>,
    pub slope: SlopeFit,
    /// The fixed `r` whose `n`-progression was used for the slope fit.
    pub slope_r: usize,
    /// Theoretical exponent `-2p / (2p + d)`.
    pub target: f64,
    /// `target +- 0.3`, the property-based acceptance band.
    pub band: (f64, f64),
}

impl RateReport {
    /// Report rows as CSV, bit-identical across runs of the same config.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,r,eta,mean_sq_error,std_error\n");
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.n, p.r, p.eta, p.mean_sq_error, p.std_error
            ));
        }
        out
    }

    /// Summary (slope, target, band, per-point diagnostics) as JSON.
    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

fn validate(config: &ExperimentConfig) -> Result<usize> {
    let d = config.model.space().dim;
    let p = config.sobolev_order;
    let q = config.model.q();
    if !(p > d as f64) {
        return Err(Error::Config(format!(
            "the rate regime requires p > d (p = {p}, d = {d})"
        )));
    }
    if !(q > d as f64 / 2.0 && q <= p) {
        return Err(Error::Config(format!(
            "the model smoothness must satisfy d/2 < q <= p (q = {q}, p = {p}, d = {d})"
        )));
    }
    if config.replications == 0 {
        return Err(Error::Config("at least one replication is required".into()));
    }
    if config.grid.is_empty() {
        return Err(Error::Config("the design grid is empty".into()));
    }
    for pt in &config.grid {
        if pt.n == 0 || pt.r < 2 {
            return Err(Error::Config(format!(
                "design points need n >= 1 and r >= 2, got (n = {}, r = {})",
                pt.n, pt.r
            )));
        }
    }
    if let Some(sweep) = &config.c0_sweep {
        if sweep.is_empty() || sweep.iter().any(|&c| !(c > 0.0)) {
            return Err(Error::Config("c0 sweep values must be positive".into()));
        }
    }
    // slope group: the r with the most distinct n values (ties to the
    // smallest r); at least three are needed for a line fit
    let mut groups: Vec<(usize, usize)> = Vec::new(); // (r, distinct n count)
    let mut rs: Vec<usize> = config.grid.iter().map(|p| p.r).collect();
    rs.sort_unstable();
    rs.dedup();
    for r in rs {
        let mut ns: Vec<usize> = config
            .grid
            .iter()
            .filter(|p| p.r == r)
            .map(|p| p.n)
            .collect();
        ns.sort_unstable();
        ns.dedup();
        groups.push((r, ns.len()));
    }
    let (best_r, best_count) = groups
        .iter()
        .copied()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .expect("non-empty grid");
    if best_count < 3 {
        return Err(Error::Config(
            "the grid needs at least 3 distinct n values at a common r for the slope fit".into(),
        ));
    }
    Ok(best_r)
}

/// Candidate penalties at a design point under the configured rule.
fn candidates(config: &ExperimentConfig, point: &DesignPoint) -> Result<Vec<(Option<f64>, f64)>> {
    match config.eta_rule {
        EtaRule::Fixed { eta } => {
            if !(eta > 0.0) {
                return Err(Error::Config(format!("fixed eta must be positive, got {eta}")));
            }
            Ok(vec![(None, eta)])
        }
        EtaRule::RateOptimal { c0 } => {
            let d = config.model.space().dim;
            let p = config.sobolev_order;
            let list = config.c0_sweep.clone().unwrap_or_else(|| vec![c0]);
            list.into_iter()
                .map(|c| {
                    Ok((
                        Some(c),
                        rate_optimal_eta(point.n, point.r as f64, p, d, c)?,
                    ))
                })
                .collect()
        }
    }
}

/// Runs the full study: simulate, fit, and integrate the error at every
/// (design point, replication), then aggregate and fit the slope.
pub fn run_rate_study(config: &ExperimentConfig) -> Result<RateReport> {
    let slope_r = validate(config)?;
    let params = *config.model.space();
    let kernel = ZonalKernel::with_tolerance(params, config.sobolev_order, config.truncation_tol)?;

    // flat task list over (point, replication); results keep task order, so
    // aggregation below is scheduling-independent
    let tasks: Vec<(usize, usize)> = (0..config.grid.len())
        .flat_map(|pt| (0..config.replications).map(move |rep| (pt, rep)))
        .collect();
    let outcomes: Vec<Result<Vec<f64>>> = tasks
        .par_iter()
        .map(|&(pt_idx, rep)| {
            let point = &config.grid[pt_idx];
            run_replication(config, &kernel, point, rep).map_err(|e| {
                e.annotate(format!(
                    "design point (n = {}, r = {}), replication {}",
                    point.n, point.r, rep
                ))
            })
        })
        .collect();

    // per point and candidate: mean over replications and its standard error
    let mut per_point: Vec<Vec<Vec<f64>>> = Vec::with_capacity(config.grid.len());
    for point in &config.grid {
        let n_cands = candidates(config, point)?.len();
        per_point.push(vec![Vec::with_capacity(config.replications); n_cands]);
    }
    for (&(pt_idx, _), outcome) in tasks.iter().zip(outcomes) {
        let errors = outcome?;
        for (cand_idx, err) in errors.into_iter().enumerate() {
            per_point[pt_idx][cand_idx].push(err);
        }
    }

    let mut points = Vec::with_capacity(config.grid.len());
    for (pt_idx, point) in config.grid.iter().enumerate() {
        let cands = candidates(config, point)?;
        let mut sweep = Vec::with_capacity(cands.len());
        for ((c0, eta), errors) in cands.iter().zip(&per_point[pt_idx]) {
            let mut sum = Kahan::default();
            for &e in errors {
                sum.add(e);
            }
            let mean = sum.value() / errors.len() as f64;
            let mut var_sum = Kahan::default();
            for &e in errors {
                var_sum.add((e - mean) * (e - mean));
            }
            let std_error = if errors.len() > 1 {
                (var_sum.value() / (errors.len() - 1) as f64 / errors.len() as f64).sqrt()
            } else {
                0.0
            };
            sweep.push(CandidateStats {
                c0: *c0,
                eta: *eta,
                mean_sq_error: mean,
                std_error,
            });
        }
        let best = sweep
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.mean_sq_error.total_cmp(&b.1.mean_sq_error))
            .map(|(i, _)| i)
            .expect("at least one candidate");
        points.push(RatePoint {
            n: point.n,
            r: point.r,
            eta: sweep[best].eta,
            c0: sweep[best].c0,
            mean_sq_error: sweep[best].mean_sq_error,
            std_error: sweep[best].std_error,
            sweep,
        });
    }

    let d = params.dim as f64;
    let target = -2.0 * config.sobolev_order / (2.0 * config.sobolev_order + d);
    let slope = fit_slope(&points, slope_r);
    Ok(RateReport {
        points,
        slope,
        slope_r,
        target,
        band: (target - SLOPE_BAND_HALF_WIDTH, target + SLOPE_BAND_HALF_WIDTH),
    })
}

/// Simulate one replication at a design point and return the Monte Carlo
/// error of every penalty candidate, fitted on the same dataset and scored
/// on the same integration points.
fn run_replication(
    config: &ExperimentConfig,
    kernel: &ZonalKernel,
    point: &DesignPoint,
    rep: usize,
) -> Result<Vec<f64>> {
    let sim_seed = derive_seed(
        config.seed,
        point.n as u64,
        point.r as u64,
        rep as u64,
        STREAM_SIMULATION,
    );
    let eval_seed = derive_seed(
        config.seed,
        point.n as u64,
        point.r as u64,
        rep as u64,
        STREAM_ERROR_EVAL,
    );
    let counts = vec![point.r; point.n];
    let mut sim_rng = ChaCha8Rng::seed_from_u64(sim_seed);
    let dataset = config
        .model
        .simulate_dataset(&counts, &config.noise, &mut sim_rng)?;
    let design = PairDesign::from_dataset(&dataset)?;
    let fitter = Fitter::new(kernel, &design)?;
    let mut errors = Vec::new();
    for (_, eta) in candidates(config, point)? {
        let est = fitter.fit(eta)?;
        let mut eval_rng = ChaCha8Rng::seed_from_u64(eval_seed);
        let (mean, _) = mc_l2_error(&est, &config.model, config.error_samples, &mut eval_rng)?;
        errors.push(mean);
    }
    Ok(errors)
}

/// Unweighted least squares of `ln(mean error)` on `ln n` over the slope
/// group, flagged degenerate below the exact-recovery floor.
fn fit_slope(points: &[RatePoint], slope_r: usize) -> SlopeFit {
    let group: Vec<&RatePoint> = points.iter().filter(|p| p.r == slope_r).collect();
    if group.iter().any(|p| p.mean_sq_error < DEGENERATE_ERROR_FLOOR) {
        return SlopeFit::Degenerate;
    }
    let xs: Vec<f64> = group.iter().map(|p| (p.n as f64).ln()).collect();
    let ys: Vec<f64> = group.iter().map(|p| p.mean_sq_error.ln()).collect();
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    SlopeFit::Fitted { slope: sxy / sxx }
}
