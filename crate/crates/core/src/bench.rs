//! Monte Carlo harness: simulate a setting `R` times, run every estimator,
//! score loading spaces by projector distance and ranks by exact agreement.
//!
//! Replication `r` draws its data from `split_seed(split_seed(seed, r), 0)`
//! and its estimator randomness from `split_seed(split_seed(seed, r), 1)`,
//! so results do not depend on scheduling or thread count.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{hooi, hosvd};
use crate::dgp::{simulate_setting, DgpConfig, Setting};
use crate::error::{Error, Result};
use crate::loading::LoadingEstimate;
use crate::preaverage::{preaverage_direction, PreaverageConfig};
use crate::projection::{estimate_loading_space, refine_directions, RefineConfig};
use crate::rank::{estimate_rank_centered, RankConfig};
use crate::tensor::{eigenvalues_sym, Matrix, TensorSeries};

/// `‖Q Qᵀ − U Uᵀ‖₂` for two bases with the same shape.
pub fn projection_error(est: &Matrix, truth: &Matrix) -> Result<f64> {
    if est.shape() != truth.shape() {
        return Err(Error::ShapeMismatch(format!(
            "estimate is {}x{}, truth is {}x{}",
            est.nrows(),
            est.ncols(),
            truth.nrows(),
            truth.ncols()
        )));
    }
    let diff = est * est.transpose() - truth * truth.transpose();
    Ok(eigenvalues_sym(&diff)?.iter().fold(0.0, |m, v| m.max(v.abs())))
}

const fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `mix(seed ^ mix(index + φ))` with the splitmix64 finalizer `mix`.
/// `mix` is a bijection, so distinct indices never share a seed.
pub const fn split_seed(seed: u64, index: u64) -> u64 {
    mix64(seed ^ mix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    /// Pre-averaging with `z = r_k`.
    PreAveraged,
    /// Pre-averaging init, refinement, projected re-estimation.
    Projected,
    Hosvd,
    Hooi,
    /// Bootstrap correlation thresholding for the ranks.
    Bcorth,
}

impl Estimator {
    pub const ALL: [Estimator; 5] =
        [Estimator::PreAveraged, Estimator::Projected, Estimator::Hosvd, Estimator::Hooi, Estimator::Bcorth];
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::PreAveraged => "pre",
            Estimator::Projected => "proj",
            Estimator::Hosvd => "hosvd",
            Estimator::Hooi => "hooi",
            Estimator::Bcorth => "bcorth",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.to_string() == s)
            .ok_or_else(|| Error::UnsupportedEstimator(s.to_string()))
    }
}

/// Extension point for competitors that are not built in. Implementations
/// must draw all randomness from `rng` to keep runs reproducible.
pub trait LoadingEstimator: Sync {
    fn name(&self) -> String;
    fn estimate(&self, x: &TensorSeries, ranks: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<LoadingEstimate>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Data-generating process; its `seed` is replaced per replication.
    pub dgp: DgpConfig,
    pub reps: usize,
    pub estimators: Vec<Estimator>,
    pub seed: u64,
    pub preaverage: PreaverageConfig,
    pub refine: RefineConfig,
    pub rank: RankConfig,
    pub hooi_iters: usize,
    /// Record wall-clock times; off gives byte-reproducible output.
    pub timing: bool,
}

impl BenchConfig {
    pub fn new(setting: Setting, dims: Vec<usize>, t: usize, reps: usize, estimators: Vec<Estimator>, seed: u64) -> Self {
        Self {
            dgp: DgpConfig::for_setting(setting, dims, t, seed),
            reps,
            estimators,
            seed,
            preaverage: PreaverageConfig::default(),
            refine: RefineConfig::default(),
            rank: RankConfig::default(),
            hooi_iters: 30,
            timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("no estimators selected".into()));
        }
        self.dgp.validate()
    }
}

/// One `(replication, estimator, mode)` outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub rep: usize,
    pub estimator: String,
    pub mode: usize,
    /// Projection error; NaN for rank-only estimators and failures.
    pub error: f64,
    /// Estimated rank for rank estimators, rank used otherwise; `None` on failure.
    pub rank_hat: Option<usize>,
    pub elapsed_ms: f64,
    /// Failure message; the replication is kept and flagged.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub setting: Option<Setting>,
    pub dims: Vec<usize>,
    pub t: usize,
    pub reps: usize,
    pub true_ranks: Vec<usize>,
    /// Estimator names in output order.
    pub estimators: Vec<String>,
    /// Sorted by replication, then estimator order, then mode.
    pub records: Vec<Record>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub estimator: String,
    pub mode: usize,
    /// `error` for loading estimators, `rank` for rank estimators.
    pub metric: &'static str,
    pub mean: f64,
    pub sd: f64,
    pub median: f64,
    /// Share of replications with every mode's rank correct (rank estimators only).
    pub correct_prop: Option<f64>,
    /// Mean wall-clock seconds per replication.
    pub runtime_s: f64,
    pub failures: usize,
}

fn mean_sd_median(xs: &[f64]) -> (f64, f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let mid = s.len() / 2;
    let median = if s.len() % 2 == 0 { 0.5 * (s[mid - 1] + s[mid]) } else { s[mid] };
    (mean, sd, median)
}

impl BenchResult {
    fn select(&self, estimator: &str, mode: usize) -> impl Iterator<Item = &Record> {
        let estimator = estimator.to_string();
        self.records.iter().filter(move |r| r.estimator == estimator && r.mode == mode)
    }

    /// Successful projection errors of one estimator and mode, in replication order.
    pub fn errors(&self, estimator: &str, mode: usize) -> Vec<f64> {
        self.select(estimator, mode).map(|r| r.error).filter(|e| e.is_finite()).collect()
    }

    /// Estimated ranks of one estimator and mode, `None` for failed replications.
    pub fn ranks(&self, estimator: &str, mode: usize) -> Vec<Option<usize>> {
        self.select(estimator, mode).map(|r| r.rank_hat).collect()
    }

    /// `(1/R) #{r : every mode's rank equals the truth}`.
    pub fn correct_proportion(&self, estimator: &str) -> f64 {
        let hits = (0..self.reps)
            .filter(|&rep| {
                (0..self.dims.len()).all(|k| {
                    self.records
                        .iter()
                        .find(|r| r.rep == rep && r.mode == k && r.estimator == estimator)
                        .is_some_and(|r| r.rank_hat == Some(self.true_ranks[k]))
                })
            })
            .count();
        hits as f64 / self.reps as f64
    }

    pub fn median_error(&self, estimator: &str, mode: usize) -> f64 {
        mean_sd_median(&self.errors(estimator, mode)).2
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for name in &self.estimators {
            let is_rank = name == &Estimator::Bcorth.to_string();
            let correct = is_rank.then(|| self.correct_proportion(name));
            for mode in 0..self.dims.len() {
                let recs: Vec<&Record> = self.select(name, mode).collect();
                let values: Vec<f64> = if is_rank {
                    recs.iter().filter_map(|r| r.rank_hat.map(|v| v as f64)).collect()
                } else {
                    recs.iter().map(|r| r.error).filter(|e| e.is_finite()).collect()
                };
                let (mean, sd, median) = mean_sd_median(&values);
                let runtime_s = recs.iter().map(|r| r.elapsed_ms).sum::<f64>() / 1000.0 / recs.len().max(1) as f64;
                rows.push(SummaryRow {
                    estimator: name.clone(),
                    mode,
                    metric: if is_rank { "rank" } else { "error" },
                    mean,
                    sd,
                    median,
                    correct_prop: correct,
                    runtime_s,
                    failures: recs.iter().filter(|r| r.failure.is_some()).count(),
                });
            }
        }
        rows
    }

    pub fn write_replications_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rep", "estimator", "mode", "error", "rank_hat", "elapsed_ms"])?;
        for r in &self.records {
            w.write_record([
                r.rep.to_string(),
                r.estimator.clone(),
                r.mode.to_string(),
                format!("{:e}", r.error),
                r.rank_hat.map(|v| v.to_string()).unwrap_or_default(),
                format!("{:.3}", r.elapsed_ms),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "estimator",
            "mode",
            "metric",
            "mean",
            "sd_x100",
            "median",
            "correct_prop",
            "runtime_s",
            "failures",
        ])?;
        for s in self.summary() {
            w.write_record([
                s.estimator,
                s.mode.to_string(),
                s.metric.to_string(),
                format!("{:.6e}", s.mean),
                format!("{:.4}", s.sd * 100.0),
                format!("{:.6e}", s.median),
                s.correct_prop.map(|p| format!("{p:.4}")).unwrap_or_default(),
                format!("{:.6}", s.runtime_s),
                s.failures.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Clock {
    on: bool,
    start: Instant,
}

impl Clock {
    fn start(on: bool) -> Self {
        Self { on, start: Instant::now() }
    }

    fn ms(&self) -> f64 {
        if self.on {
            self.start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        }
    }
}

/// Failures travel as `"category: message"` so they can be shared between
/// estimators that reuse the same upstream computation.
type Outcome<T> = std::result::Result<T, String>;

fn describe(e: Error) -> String {
    format!("{}: {e}", e.category())
}

fn push_estimates(
    out: &mut Vec<Record>,
    rep: usize,
    name: &str,
    result: Outcome<Vec<LoadingEstimate>>,
    bases: &[Matrix],
    elapsed_ms: f64,
) {
    let k = bases.len();
    match result.and_then(|est| {
        est.iter()
            .zip(bases)
            .map(|(e, u)| projection_error(&e.columns, u).map(|err| (err, e.rank())))
            .collect::<Result<Vec<_>>>()
            .map_err(describe)
    }) {
        Ok(scored) => out.extend(scored.into_iter().enumerate().map(|(mode, (error, r))| Record {
            rep,
            estimator: name.to_string(),
            mode,
            error,
            rank_hat: Some(r),
            elapsed_ms,
            failure: None,
        })),
        Err(e) => out.extend((0..k).map(|mode| Record {
            rep,
            estimator: name.to_string(),
            mode,
            error: f64::NAN,
            rank_hat: None,
            elapsed_ms,
            failure: Some(e.clone()),
        })),
    }
}

/// Pre-averaging, refinement, projected loadings and bootstrap ranks,
/// sharing one estimator stream.
struct PipelineOutput {
    pre: Outcome<Vec<LoadingEstimate>>,
    pre_ms: f64,
    proj: Outcome<Vec<LoadingEstimate>>,
    proj_ms: f64,
    ranks: Outcome<Vec<usize>>,
    rank_ms: f64,
}

fn run_pipeline(cfg: &BenchConfig, x: &TensorSeries, ranks: &[usize], rng: &mut ChaCha8Rng) -> PipelineOutput {
    let clock = Clock::start(cfg.timing);
    let pre: Outcome<Vec<LoadingEstimate>> = (0..x.order())
        .map(|k| {
            let pc = PreaverageConfig { z: ranks[k], ..cfg.preaverage.clone() };
            preaverage_direction(x, k, &pc, rng).map(|o| o.estimate)
        })
        .collect::<Result<_>>()
        .map_err(describe);
    let pre_ms = clock.ms();

    let state = pre.clone().and_then(|est| {
        let init: Vec<_> = est.iter().map(|e| e.columns.column(0).into_owned()).collect();
        refine_directions(x, &init, &cfg.refine).map_err(describe)
    });
    let proj = state.clone().and_then(|s| {
        (0..x.order())
            .map(|k| estimate_loading_space(x, k, &s, ranks[k]))
            .collect::<Result<Vec<_>>>()
            .map_err(describe)
    });
    let proj_ms = clock.ms();

    let rank_clock = Clock::start(cfg.timing);
    let centered = x.centered();
    let rank_out = state.and_then(|s| {
        (0..x.order())
            .map(|k| estimate_rank_centered(&centered, k, &s, &cfg.rank, rng).map(|d| d.rank))
            .collect::<Result<Vec<_>>>()
            .map_err(describe)
    });
    let rank_ms = proj_ms + rank_clock.ms();
    PipelineOutput { pre, pre_ms, proj, proj_ms, ranks: rank_out, rank_ms }
}

fn run_replication(cfg: &BenchConfig, rep: usize, extra: &[&dyn LoadingEstimator]) -> Vec<Record> {
    let rep_seed = split_seed(cfg.seed, rep as u64);
    let dgp = DgpConfig { seed: split_seed(rep_seed, 0), ..cfg.dgp.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(rep_seed, 1));
    let k = dgp.dims.len();
    let ranks = dgp.ranks.clone();
    let mut out = Vec::new();

    let truth = match simulate_setting(&dgp) {
        Ok(t) => t,
        Err(e) => {
            let msg = describe(e);
            let names = cfg.estimators.iter().map(|e| e.to_string()).chain(extra.iter().map(|e| e.name()));
            for name in names {
                push_estimates(&mut out, rep, &name, Err(msg.clone()), &vec![Matrix::zeros(0, 0); k], 0.0);
            }
            return out;
        }
    };
    let x = &truth.series;
    let needs_pipeline = cfg
        .estimators
        .iter()
        .any(|e| matches!(e, Estimator::PreAveraged | Estimator::Projected | Estimator::Bcorth));
    let pipeline = needs_pipeline.then(|| run_pipeline(cfg, x, &ranks, &mut rng));

    for est in &cfg.estimators {
        let name = est.to_string();
        match est {
            Estimator::PreAveraged | Estimator::Projected => {
                let p = pipeline.as_ref().expect("pipeline runs for pre/proj");
                let (res, ms) = if *est == Estimator::PreAveraged {
                    (&p.pre, p.pre_ms)
                } else {
                    (&p.proj, p.proj_ms)
                };
                push_estimates(&mut out, rep, &name, res.clone(), &truth.bases, ms);
            }
            Estimator::Hosvd | Estimator::Hooi => {
                let clock = Clock::start(cfg.timing);
                let res = if *est == Estimator::Hosvd { hosvd(x, &ranks) } else { hooi(x, &ranks, cfg.hooi_iters) };
                push_estimates(&mut out, rep, &name, res.map_err(describe), &truth.bases, clock.ms());
            }
            Estimator::Bcorth => {
                let p = pipeline.as_ref().expect("pipeline runs for bcorth");
                for mode in 0..k {
                    let (rank_hat, failure) = match &p.ranks {
                        Ok(r) => (Some(r[mode]), None),
                        Err(e) => (None, Some(e.clone())),
                    };
                    out.push(Record {
                        rep,
                        estimator: name.clone(),
                        mode,
                        error: f64::NAN,
                        rank_hat,
                        elapsed_ms: p.rank_ms,
                        failure,
                    });
                }
            }
        }
    }
    for e in extra {
        let clock = Clock::start(cfg.timing);
        let mut erng = ChaCha8Rng::seed_from_u64(split_seed(rep_seed, 2));
        let res = e.estimate(x, &ranks, &mut erng).map_err(describe);
        push_estimates(&mut out, rep, &e.name(), res, &truth.bases, clock.ms());
    }
    out
}

/// Run all replications on the current rayon pool.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchResult> {
    run_benchmark_with(cfg, &[])
}

/// As [`run_benchmark`], with additional user-supplied estimators.
pub fn run_benchmark_with(cfg: &BenchConfig, extra: &[&dyn LoadingEstimator]) -> Result<BenchResult> {
    cfg.validate()?;
    let per_rep: Vec<Vec<Record>> = (0..cfg.reps).into_par_iter().map(|r| run_replication(cfg, r, extra)).collect();
    let mut estimators: Vec<String> = cfg.estimators.iter().map(|e| e.to_string()).collect();
    estimators.extend(extra.iter().map(|e| e.name()));
    Ok(BenchResult {
        setting: cfg.dgp.setting,
        dims: cfg.dgp.dims.clone(),
        t: cfg.dgp.t,
        reps: cfg.reps,
        true_ranks: cfg.dgp.ranks.clone(),
        estimators,
        records: per_rep.into_iter().flatten().collect(),
    })
}

/// Run on a dedicated pool of `threads` workers.
pub fn run_benchmark_threads(cfg: &BenchConfig, threads: usize) -> Result<BenchResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    pool.install(|| run_benchmark(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_span_has_zero_error() {
        let q = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let rotated = Matrix::from_row_slice(3, 2, &[s, -s, s, s, 0.0, 0.0]);
        assert!(projection_error(&q, &rotated).unwrap() < 1e-12);
    }

    #[test]
    fn orthogonal_rank_one_has_unit_error() {
        let a = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let b = Matrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert!((projection_error(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        assert!(projection_error(&a, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn split_seeds_are_distinct() {
        let mut seeds: Vec<u64> = (0..10_000).map(|r| split_seed(42, r)).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(split_seed(1, 0), split_seed(2, 0));
    }

    #[test]
    fn estimator_names_round_trip() {
        for e in Estimator::ALL {
            assert_eq!(e.to_string().parse::<Estimator>().unwrap(), e);
        }
        assert!(matches!("topup".parse::<Estimator>(), Err(Error::UnsupportedEstimator(_))));
    }

    #[test]
    fn summary_statistics() {
        let (m, s, med) = mean_sd_median(&[1.0, 2.0, 3.0, 10.0]);
        assert_eq!(m, 4.0);
        assert!((s - (50.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(med, 2.5);
    }
}
