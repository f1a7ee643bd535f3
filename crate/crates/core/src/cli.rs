//! Command-line driver: `simulate`, `estimate`, `bench` and `capm`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bench::{projection_error, run_benchmark_threads};
use crate::config::{parse_bench_config, parse_c_grid, parse_dgp_config};
use crate::dgp::{capm_residuals, simulate_setting};
use crate::error::{Error, Result};
use crate::io::{load_labeled_matrices, load_numeric_csv, load_series, save_series, write_labeled_matrices, write_matrix_csv};
use crate::preaverage::{preaverage_direction, PreaverageConfig, SubsetSize};
use crate::projection::{estimate_loading_space, refine_directions, RefineConfig};
use crate::rank::{estimate_rank, RankConfig};
use crate::tensor::{Matrix, TensorSeries};

#[derive(Debug, Parser)]
#[command(name = "tensor-factor", version, about = "Tensor factor model estimation and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a tensor series from a key=value config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate loading spaces (and ranks) of a stored series.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo benchmark.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads; results do not depend on this.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Remove the market factor from a T×n return panel.
    Capm {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        market: PathBuf,
        /// Tensor dimensions whose product is n, e.g. 10,10.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    pub input: PathBuf,
    /// Fixed ranks per mode; skips rank estimation.
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,
    #[arg(long, default_value_t = 200)]
    pub m0: usize,
    #[arg(long, default_value_t = 5)]
    pub m: usize,
    #[arg(long, default_value_t = 0.5)]
    pub n_frac: f64,
    #[arg(long, default_value_t = 30)]
    pub iters: usize,
    /// Bootstrap draws.
    #[arg(long = "b", default_value_t = 50)]
    pub b: usize,
    /// Bootstrap keep probability.
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    /// Threshold grid, `lo:hi:n` or a comma list.
    #[arg(long, default_value = "0.1:10:100")]
    pub c_grid: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Where to write loading_mode<k>.csv.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Ground-truth sidecar written by `simulate`; reports projection errors.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

/// Sidecar path holding the ground truth of a simulated file.
pub fn truth_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".truth");
    PathBuf::from(s)
}

fn with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out } => cmd_simulate(&config, &out, stdout),
        Command::Estimate(args) => cmd_estimate(&args, stdout),
        Command::Bench { config, out_dir, threads } => cmd_bench(&config, &out_dir, threads, stdout),
        Command::Capm { panel, market, dims, out } => cmd_capm(&panel, &market, &dims, &out, stdout),
    }
}

pub fn cmd_simulate(config: &Path, out: &Path, stdout: &mut dyn Write) -> Result<()> {
    let cfg = parse_dgp_config(&fs::read_to_string(config)?)?;
    let truth = simulate_setting(&cfg)?;
    save_series(&truth.series, out)?;
    let mut mats: Vec<(String, &Matrix)> = Vec::new();
    for (k, (a, u)) in truth.loadings.iter().zip(&truth.bases).enumerate() {
        mats.push((format!("loading_{k}"), a));
        mats.push((format!("basis_{k}"), u));
    }
    let mean = Matrix::from_column_slice(truth.mean.len(), 1, truth.mean.data());
    mats.push(("mean".into(), &mean));
    let sidecar = truth_path(out);
    write_labeled_matrices(&mats, BufWriter::new(fs::File::create(&sidecar)?))?;
    writeln!(stdout, "wrote {} and {}", out.display(), sidecar.display())?;
    Ok(())
}

fn truth_bases(path: &Path, order: usize) -> Result<Vec<Matrix>> {
    let mats = load_labeled_matrices(path)?;
    (0..order)
        .map(|k| {
            let name = format!("basis_{k}");
            mats.iter()
                .find(|(n, _)| *n == name)
                .map(|(_, m)| m.clone())
                .ok_or_else(|| Error::Parse(format!("{} has no `{name}`", path.display())))
        })
        .collect()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(" ")
}

pub fn cmd_estimate(args: &EstimateArgs, stdout: &mut dyn Write) -> Result<()> {
    let x: TensorSeries = load_series(&args.input)?;
    x.require_steps(2)?;
    let k = x.order();
    if let Some(r) = &args.ranks {
        if r.len() != k {
            return Err(Error::ShapeMismatch(format!("{} ranks for an order-{k} series", r.len())));
        }
    }
    let truth = args.truth.as_deref().map(|p| truth_bases(p, k)).transpose()?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);

    let pre = PreaverageConfig { m0: args.m0, m: args.m, subset: SubsetSize::Fraction(args.n_frac), z: 1, bulk_index: None };
    let init = (0..k)
        .map(|mode| preaverage_direction(&x, mode, &pre, &mut rng).map(|o| o.estimate.columns.column(0).into_owned()))
        .collect::<Result<Vec<_>>>()?;
    let refine = RefineConfig { max_iters: args.iters, ..Default::default() };
    let state = refine_directions(&x, &init, &refine)?;
    writeln!(stdout, "refinement sweeps: {}", state.iteration)?;

    let rank_cfg = RankConfig { replicates: args.b, keep_prob: args.p, c_grid: parse_c_grid(&args.c_grid)?, ..Default::default() };
    fs::create_dir_all(&args.out_dir)?;
    for mode in 0..k {
        let (rank, c_hat) = match &args.ranks {
            Some(r) => (r[mode], None),
            None => {
                let d = estimate_rank(&x, mode, &state, &rank_cfg, &mut rng)?;
                (d.rank, Some(d.c_hat))
            }
        };
        let est = estimate_loading_space(&x, mode, &state, rank)?;
        let c_text = c_hat.map_or_else(|| "given".to_string(), |c| format!("c_hat={c:.4}"));
        writeln!(stdout, "mode {mode}: rank {rank} ({c_text}) eigenvalues {}", join(&est.eigenvalues))?;
        if let Some(bases) = &truth {
            if bases[mode].ncols() == rank {
                writeln!(stdout, "mode {mode}: error {:.6e}", projection_error(&est.columns, &bases[mode])?)?;
            } else {
                writeln!(stdout, "mode {mode}: error n/a (true rank {})", bases[mode].ncols())?;
            }
        }
        let path = args.out_dir.join(format!("loading_mode{mode}.csv"));
        write_matrix_csv(&est.columns, "q", BufWriter::new(fs::File::create(path)?))?;
    }
    Ok(())
}

pub fn cmd_bench(config: &Path, out_dir: &Path, threads: usize, stdout: &mut dyn Write) -> Result<()> {
    if threads == 0 {
        return Err(Error::InvalidParameter("--threads must be at least 1".into()));
    }
    let cfg = parse_bench_config(&fs::read_to_string(config)?)?;
    let result = run_benchmark_threads(&cfg, threads)?;
    fs::create_dir_all(out_dir)?;
    result.write_replications_csv(BufWriter::new(fs::File::create(out_dir.join("replications.csv"))?))?;
    result.write_summary_csv(BufWriter::new(fs::File::create(out_dir.join("summary.csv"))?))?;
    for row in result.summary() {
        let prop = row.correct_prop.map(|p| format!(" correct={p:.2}")).unwrap_or_default();
        writeln!(
            stdout,
            "{:>6} mode {}: {} mean={:.4e} median={:.4e}{prop} failures={}",
            row.estimator, row.mode, row.metric, row.mean, row.median, row.failures
        )?;
    }
    Ok(())
}

pub fn cmd_capm(panel: &Path, market: &Path, dims: &[usize], out: &Path, stdout: &mut dyn Write) -> Result<()> {
    let y = load_numeric_csv(panel)?;
    let x = load_numeric_csv(market)?;
    if x.ncols() != 1 {
        return Err(Error::ShapeMismatch(format!("market file has {} columns, expected 1", x.ncols())));
    }
    if y.nrows() != x.nrows() {
        return Err(Error::ShapeMismatch(format!("panel has {} rows, market has {}", y.nrows(), x.nrows())));
    }
    let n: usize = dims.iter().product();
    if dims.is_empty() || n != y.ncols() {
        return Err(Error::ShapeMismatch(format!("panel has {} columns, dims {dims:?} give {n}", y.ncols())));
    }
    let fit = capm_residuals(&y.transpose(), x.column(0).as_slice())?;
    let series = TensorSeries::from_flat(dims.to_vec(), y.nrows(), fit.residuals.as_slice())?;
    save_series(&series, out)?;
    let log = with_suffix(out, ".log");
    let mut w = BufWriter::new(fs::File::create(&log)?);
    writeln!(w, "column,beta")?;
    for (j, b) in fit.betas.iter().enumerate() {
        writeln!(w, "{j},{b:.16e}")?;
    }
    w.flush()?;
    writeln!(stdout, "wrote {} ({} periods, {n} series); betas in {}", out.display(), y.nrows(), log.display())?;
    Ok(())
}
