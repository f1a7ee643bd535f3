//! Core-rank estimation by thresholding correlation eigenvalues of the
//! projected data, with the threshold constant picked by a fibre bootstrap.
//!
//! For each bootstrap draw the projection vector `q_{-k}` is reweighted by
//! fibre multiplicities (fibres drawn with replacement, each draw kept with
//! probability `p`). The rank at constant `C` counts correlation eigenvalues
//! above `1 + C/√T`; `Ĉ` minimizes the variance of that count across draws
//! and the final rank is the mode of the counts at `Ĉ`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::projection::ProjectionState;
use crate::tensor::{eigenvalues_sym, second_moment, Matrix, TensorSeries, Vector};

/// `D^{-1/2} S D^{-1/2}` with `D = diag(S)`.
pub fn correlation_from_covariance(s: &Matrix) -> Result<Matrix> {
    if !s.is_square() {
        return Err(Error::ShapeMismatch("correlation needs a square matrix".into()));
    }
    let n = s.nrows();
    let mut inv_sd = Vec::with_capacity(n);
    for i in 0..n {
        let v = s[(i, i)];
        if !(v > 0.0) {
            return Err(Error::DeadCoordinate { index: i });
        }
        inv_sd.push(1.0 / v.sqrt());
    }
    let mut r = Matrix::from_fn(n, n, |i, j| s[(i, j)] * inv_sd[i] * inv_sd[j]);
    for i in 0..n {
        r[(i, i)] = 1.0;
    }
    Ok(r)
}

/// Number of eigenvalues strictly above `1 + eta`.
pub fn rank_threshold(r: &Matrix, eta: f64) -> Result<usize> {
    let vals = eigenvalues_sym(r)?;
    Ok(count_above(vals.as_slice(), 1.0 + eta))
}

fn count_above(sorted_desc: &[f64], threshold: f64) -> usize {
    sorted_desc.iter().take_while(|v| **v > threshold).count()
}

/// One fibre-bootstrap draw: column `i` of `W_b` is zero except for row
/// `targets[i]`, which holds `keep[i]` as 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapWeights {
    pub targets: Vec<usize>,
    pub keep: Vec<bool>,
}

impl BootstrapWeights {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Diagonal of `W_b W_b^T`: how many kept draws landed on each fibre.
    pub fn multiplicities(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.targets.len()];
        for (&j, &k) in self.targets.iter().zip(&self.keep) {
            if k {
                m[j] += 1.0;
            }
        }
        m
    }

    /// `W_b W_b^T q`.
    pub fn apply(&self, q: &Vector) -> Vector {
        let m = self.multiplicities();
        Vector::from_iterator(q.len(), q.iter().zip(&m).map(|(a, b)| a * b))
    }

    /// Dense `W_b`, mostly for tests.
    pub fn matrix(&self) -> Matrix {
        let n = self.targets.len();
        let mut w = Matrix::zeros(n, n);
        for (i, (&j, &k)) in self.targets.iter().zip(&self.keep).enumerate() {
            if k {
                w[(j, i)] = 1.0;
            }
        }
        w
    }
}

pub fn bootstrap_weights<R: Rng + ?Sized>(n_fibres: usize, p: f64, rng: &mut R) -> Result<BootstrapWeights> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!("Bernoulli probability {p} not in (0, 1]")));
    }
    if n_fibres == 0 {
        return Err(Error::InvalidParameter("no fibres to resample".into()));
    }
    let mut targets = Vec::with_capacity(n_fibres);
    let mut keep = Vec::with_capacity(n_fibres);
    for _ in 0..n_fibres {
        targets.push(rng.random_range(0..n_fibres));
        keep.push(rng.random_bool(p));
    }
    Ok(BootstrapWeights { targets, keep })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModeTieBreak {
    #[default]
    Smallest,
    Largest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankConfig {
    /// Number of bootstrap draws `B`.
    pub replicates: usize,
    /// Bernoulli keep probability of each resampled fibre.
    pub keep_prob: f64,
    /// Candidate constants `C`, ascending.
    pub c_grid: Vec<f64>,
    pub tie_break: ModeTieBreak,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self { replicates: 50, keep_prob: 0.5, c_grid: linear_grid(0.1, 10.0, 100), tie_break: ModeTieBreak::Smallest }
    }
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankDecision {
    pub mode: usize,
    pub rank: usize,
    /// Selected threshold constant `Ĉ`.
    pub c_hat: f64,
    /// Bootstrap ranks at `Ĉ`, one per usable draw.
    pub bootstrap_ranks: Vec<usize>,
    /// `(C, sample variance of the bootstrap ranks)` over the grid.
    pub variance_curve: Vec<(f64, f64)>,
    /// Draws skipped because their correlation matrix had a dead coordinate.
    pub skipped: usize,
}

fn sample_variance(xs: &[usize]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<usize>() as f64 / n;
    xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Index of the midpoint of the longest run of minimal variance; the
/// earliest run wins ties.
fn plateau_midpoint(vars: &[f64]) -> usize {
    let min = vars.iter().copied().fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * min.abs().max(1.0);
    let mut best = (0usize, 0usize);
    let mut run_start = None;
    for i in 0..=vars.len() {
        let on = i < vars.len() && (vars[i] - min).abs() <= tol;
        match (on, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                if i - s > best.1 - best.0 {
                    best = (s, i);
                }
                run_start = None;
            }
            _ => {}
        }
    }
    best.0 + (best.1 - best.0 - 1) / 2
}

fn most_frequent(xs: &[usize], tie: ModeTieBreak) -> usize {
    let max = xs.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0usize; max + 1];
    for &x in xs {
        counts[x] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0);
    let mut winners = counts.iter().enumerate().filter(|(_, c)| **c == top).map(|(v, _)| v);
    match tie {
        ModeTieBreak::Smallest => winners.next().unwrap_or(0),
        ModeTieBreak::Largest => winners.last().unwrap_or(0),
    }
}

/// Bootstrap correlation-thresholding rank estimate for mode `mode`.
pub fn estimate_rank<R: Rng + ?Sized>(
    x: &TensorSeries,
    mode: usize,
    state: &ProjectionState,
    cfg: &RankConfig,
    rng: &mut R,
) -> Result<RankDecision> {
    x.require_steps(2)?;
    estimate_rank_centered(&x.centered(), mode, state, cfg, rng)
}

/// As [`estimate_rank`] for a series that is already centered.
pub(crate) fn estimate_rank_centered<R: Rng + ?Sized>(
    centered: &TensorSeries,
    mode: usize,
    state: &ProjectionState,
    cfg: &RankConfig,
    rng: &mut R,
) -> Result<RankDecision> {
    if cfg.replicates < 2 {
        return Err(Error::InvalidParameter("need at least 2 bootstrap draws".into()));
    }
    if cfg.c_grid.is_empty() || cfg.c_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("threshold grid must be non-empty and ascending".into()));
    }
    let q_minus = state.direction_minus(mode)?;
    let draws = (0..cfg.replicates)
        .map(|_| bootstrap_weights(q_minus.len(), cfg.keep_prob, rng))
        .collect::<Result<Vec<_>>>()?;

    let mut spectra: Vec<Vec<f64>> = Vec::with_capacity(draws.len());
    let mut skipped = 0;
    for w in &draws {
        let y = centered.contract_all_but(mode, &w.apply(&q_minus))?;
        match correlation_from_covariance(&second_moment(&y)) {
            Ok(r) => spectra.push(eigenvalues_sym(&r)?.iter().copied().collect()),
            Err(Error::DeadCoordinate { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if spectra.len() < 2 {
        return Err(Error::DegenerateCovariance(format!(
            "{skipped} of {} bootstrap correlation matrices are degenerate",
            draws.len()
        )));
    }

    let scale = (centered.len() as f64).sqrt().recip();
    let ranks_at = |c: f64| -> Vec<usize> {
        spectra.iter().map(|vals| count_above(vals, 1.0 + c * scale)).collect()
    };
    let variance_curve: Vec<(f64, f64)> =
        cfg.c_grid.iter().map(|&c| (c, sample_variance(&ranks_at(c)))).collect();
    let vars: Vec<f64> = variance_curve.iter().map(|(_, v)| *v).collect();
    let c_hat = cfg.c_grid[plateau_midpoint(&vars)];
    let bootstrap_ranks = ranks_at(c_hat);
    let rank = most_frequent(&bootstrap_ranks, cfg.tie_break);
    Ok(RankDecision { mode, rank, c_hat, bootstrap_ranks, variance_curve, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn correlation_cases() {
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 5.0, 0.1]));
        assert_eq!(correlation_from_covariance(&d).unwrap(), Matrix::identity(3, 3));
        let s = Matrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 4.0]);
        let r = correlation_from_covariance(&s).unwrap();
        assert_eq!(r, Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
        let r3 = correlation_from_covariance(&(s * 3.0)).unwrap();
        assert!((r3 - r).amax() < 1e-15);
        let dead = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(correlation_from_covariance(&dead), Err(Error::DeadCoordinate { index: 1 })));
    }

    #[test]
    fn threshold_counts() {
        assert_eq!(rank_threshold(&Matrix::identity(5, 5), 0.1).unwrap(), 0);
        let vals = [2.5, 1.4, 0.6, 0.3, 0.2];
        let m = Matrix::from_diagonal(&Vector::from_column_slice(&vals));
        assert_eq!(rank_threshold(&m, 0.3).unwrap(), 2);
        assert_eq!(rank_threshold(&m, 1.6).unwrap(), 0);
    }

    #[test]
    fn bootstrap_draw_is_reproducible() {
        let a = bootstrap_weights(3, 1.0, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = bootstrap_weights(3, 1.0, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
        assert!(a.keep.iter().all(|k| *k));
        assert!(a.targets.iter().all(|t| *t < 3));
        assert_eq!(a.multiplicities().iter().sum::<f64>(), 3.0);
        assert!(bootstrap_weights(3, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
        assert!(bootstrap_weights(3, 1.5, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn weights_match_dense_product() {
        let w = bootstrap_weights(7, 0.5, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let dense = w.matrix();
        for col in dense.column_iter() {
            let nz: Vec<f64> = col.iter().copied().filter(|v| *v != 0.0).collect();
            assert!(nz.len() <= 1 && nz.iter().all(|v| *v == 1.0));
        }
        let q = Vector::from_fn(7, |i, _| i as f64 - 2.5);
        let want = &dense * dense.transpose() * &q;
        assert!((w.apply(&q) - want).amax() < 1e-15);
    }

    #[test]
    fn all_dropped_is_zero() {
        let w = BootstrapWeights { targets: vec![0, 1, 1], keep: vec![false; 3] };
        assert_eq!(w.apply(&Vector::from_element(3, 1.0)), Vector::zeros(3));
    }

    #[test]
    fn plateau_and_mode_tie_breaks() {
        assert_eq!(plateau_midpoint(&[1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0]), 5);
        assert_eq!(plateau_midpoint(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]), 1);
        assert_eq!(plateau_midpoint(&[3.0]), 0);
        assert_eq!(most_frequent(&[1, 2, 2, 1, 3], ModeTieBreak::Smallest), 1);
        assert_eq!(most_frequent(&[1, 2, 2, 1, 3], ModeTieBreak::Largest), 2);
        assert_eq!(most_frequent(&[0, 0, 4], ModeTieBreak::Smallest), 0);
    }

    #[test]
    fn sample_variance_matches_definition() {
        assert_eq!(sample_variance(&[2, 2, 2]), 0.0);
        assert!((sample_variance(&[1, 2, 3]) - 1.0).abs() < 1e-15);
    }
}
