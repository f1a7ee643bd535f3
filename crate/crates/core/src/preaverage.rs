//! Initial loading directions from sums of randomly sampled fibres.
//!
//! For mode `k`, every mode-k fibre of `X_t` follows a vector factor model
//! with the same loading matrix `A_k`, so summing a subset of fibres gives a
//! `d_k`-dimensional series whose covariance still carries `A_k`. Subsets are
//! Cartesian products of per-mode index sets. Each draw is scored by the
//! eigenvalue ratio `λ_1/λ_j` of its centered covariance; the `m` best draws
//! are averaged and the leading eigenvectors of the average are returned.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::loading::{LoadingEstimate, Method};
use crate::tensor::{centered_covariance, eigen_sym, eigenvalues_sym, Matrix, ModeLayout, TensorSeries};

/// Relative floor under which `λ_j` is treated as zero.
const DEGENERATE_RATIO: f64 = 1e-12;

/// One random draw of fibres for mode `mode`: an index subset for every
/// other mode, combined as a Cartesian product.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberSampleSet {
    pub mode: usize,
    /// One sorted subset per mode; the entry for `mode` itself is empty.
    pub subsets: Vec<Vec<usize>>,
    /// Eigenvalue-ratio score, filled in once the sample has been evaluated.
    pub er_score: Option<f64>,
}

impl FiberSampleSet {
    /// Sample covering every fibre.
    pub fn full(dims: &[usize], mode: usize) -> Self {
        let subsets = dims
            .iter()
            .enumerate()
            .map(|(l, &d)| if l == mode { Vec::new() } else { (0..d).collect() })
            .collect();
        Self { mode, subsets, er_score: None }
    }

    /// `d_{-k,m}`: the number of fibres in the product.
    pub fn product_size(&self) -> usize {
        self.subsets
            .iter()
            .enumerate()
            .filter(|(l, _)| *l != self.mode)
            .map(|(_, s)| s.len())
            .product()
    }

    /// Unfolding column indices of every fibre in the product.
    pub fn columns(&self, dims: &[usize]) -> Vec<usize> {
        let mut cols = vec![0usize];
        let mut stride = 1;
        for (l, &d) in dims.iter().enumerate() {
            if l == self.mode {
                continue;
            }
            let subset = &self.subsets[l];
            let mut next = Vec::with_capacity(cols.len() * subset.len());
            for &i in subset {
                next.extend(cols.iter().map(|c| c + i * stride));
            }
            cols = next;
            stride *= d;
        }
        cols
    }

    fn validate(&self, dims: &[usize]) -> Result<()> {
        if self.subsets.len() != dims.len() {
            return Err(Error::ShapeMismatch(format!(
                "sample has {} subsets for an order-{} tensor",
                self.subsets.len(),
                dims.len()
            )));
        }
        for (l, (s, &d)) in self.subsets.iter().zip(dims).enumerate() {
            if l == self.mode {
                continue;
            }
            if s.is_empty() {
                return Err(Error::InvalidParameter(format!("empty index subset for mode {l}")));
            }
            if s.iter().any(|&i| i >= d) {
                return Err(Error::InvalidParameter(format!("subset index out of range for mode {l}")));
            }
        }
        Ok(())
    }
}

/// Sum of mode-k fibres per time step, as a `d_k × T` matrix. Without a
/// sample every fibre is summed.
pub fn sum_fibers(x: &TensorSeries, mode: usize, sample: Option<&FiberSampleSet>) -> Result<Matrix> {
    let lay = ModeLayout::new(x.dims(), mode)?;
    let cols: Vec<(usize, f64)> = match sample {
        None => (0..lay.fibres()).map(|c| (c, 1.0)).collect(),
        Some(s) => {
            if s.mode != mode {
                return Err(Error::InvalidParameter(format!(
                    "sample drawn for mode {}, used for mode {mode}",
                    s.mode
                )));
            }
            s.validate(x.dims())?;
            s.columns(x.dims()).into_iter().map(|c| (c, 1.0)).collect()
        }
    };
    x.weighted_fibre_sum(mode, &cols)
}

/// Draw `m0` independent fibre samples. `sizes[l]` is the subset size for
/// mode `l`; `sizes[mode]` is ignored.
pub fn sample_index_sets<R: Rng + ?Sized>(
    dims: &[usize],
    mode: usize,
    sizes: &[usize],
    m0: usize,
    rng: &mut R,
) -> Result<Vec<FiberSampleSet>> {
    ModeLayout::new(dims, mode)?;
    if sizes.len() != dims.len() {
        return Err(Error::InvalidParameter(format!(
            "need {} subset sizes, got {}",
            dims.len(),
            sizes.len()
        )));
    }
    for (l, (&n, &d)) in sizes.iter().zip(dims).enumerate() {
        if l != mode && (n == 0 || n > d) {
            return Err(Error::InvalidParameter(format!("subset size {n} for mode {l} not in 1..={d}")));
        }
    }
    if m0 == 0 {
        return Err(Error::InvalidParameter("m0 must be at least 1".into()));
    }
    let samples = (0..m0)
        .map(|_| {
            let subsets = dims
                .iter()
                .enumerate()
                .map(|(l, &d)| {
                    if l == mode {
                        Vec::new()
                    } else {
                        let mut s = index::sample(rng, d, sizes[l]).into_vec();
                        s.sort_unstable();
                        s
                    }
                })
                .collect();
            FiberSampleSet { mode, subsets, er_score: None }
        })
        .collect();
    Ok(samples)
}

/// `λ_1/λ_j` of a covariance matrix, `j` counted from 1 in descending order.
pub fn eigenvalue_ratio(cov: &Matrix, j: usize) -> Result<f64> {
    if j == 0 || j > cov.nrows() {
        return Err(Error::InvalidParameter(format!("bulk index {j} not in 1..={}", cov.nrows())));
    }
    let vals = eigenvalues_sym(cov)?;
    ratio_of(&vals, j)
}

fn ratio_of(vals: &nalgebra::DVector<f64>, j: usize) -> Result<f64> {
    let top = vals[0];
    let bulk = vals[j - 1];
    if top <= 0.0 || bulk <= top * DEGENERATE_RATIO {
        return Err(Error::DegenerateCovariance(format!("λ_{j} = {bulk:e} relative to λ_1 = {top:e}")));
    }
    Ok(top / bulk)
}

/// Per-mode subset sizes `n_l`.
#[derive(Debug, Clone, PartialEq)]
pub enum SubsetSize {
    /// `n_l = max(1, ⌊f·d_l⌋)`.
    Fraction(f64),
    /// Explicit sizes, one per mode.
    Explicit(Vec<usize>),
}

impl SubsetSize {
    pub fn resolve(&self, dims: &[usize]) -> Result<Vec<usize>> {
        match self {
            SubsetSize::Fraction(f) => {
                if !(*f > 0.0 && *f <= 1.0) {
                    return Err(Error::InvalidParameter(format!("subset fraction {f} not in (0, 1]")));
                }
                Ok(dims.iter().map(|&d| ((f * d as f64).floor() as usize).clamp(1, d)).collect())
            }
            SubsetSize::Explicit(v) => Ok(v.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreaverageConfig {
    /// Number of random fibre samples drawn.
    pub m0: usize,
    /// Number of best-scoring samples aggregated. `m = 1` gives the maximum
    /// eigenvalue ratio estimator.
    pub m: usize,
    pub subset: SubsetSize,
    /// Number of leading eigenvectors returned.
    pub z: usize,
    /// Eigenvalue position `j` in the score `λ_1/λ_j`; defaults to
    /// `⌊min(T, d_k)/2⌋`.
    pub bulk_index: Option<usize>,
}

impl Default for PreaverageConfig {
    fn default() -> Self {
        Self { m0: 200, m: 5, subset: SubsetSize::Fraction(0.5), z: 1, bulk_index: None }
    }
}

#[derive(Debug, Clone)]
pub struct PreaverageOutput {
    pub estimate: LoadingEstimate,
    /// The `m` aggregated samples, best score first.
    pub chosen: Vec<FiberSampleSet>,
    /// Indices of the chosen samples in draw order.
    pub chosen_indices: Vec<usize>,
    /// Scores of all `m0` draws; degenerate draws score 1.
    pub scores: Vec<f64>,
    pub aggregated: Matrix,
}

pub fn default_bulk_index(t: usize, d: usize) -> usize {
    (t.min(d) / 2).clamp(1, d)
}

/// Pre-averaging estimate of the leading `cfg.z` directions of mode `mode`.
pub fn preaverage_direction<R: Rng + ?Sized>(
    x: &TensorSeries,
    mode: usize,
    cfg: &PreaverageConfig,
    rng: &mut R,
) -> Result<PreaverageOutput> {
    x.require_steps(2)?;
    let dims = x.dims();
    let lay = ModeLayout::new(dims, mode)?;
    if cfg.m == 0 || cfg.m > cfg.m0 {
        return Err(Error::InvalidParameter(format!("need 1 <= m <= m0, got m={} m0={}", cfg.m, cfg.m0)));
    }
    if cfg.z == 0 || cfg.z > lay.dim {
        return Err(Error::RankTooLarge { mode, rank: cfg.z, dim: lay.dim });
    }
    let bulk = cfg.bulk_index.unwrap_or_else(|| default_bulk_index(x.len(), lay.dim));
    if bulk == 0 || bulk > lay.dim {
        return Err(Error::InvalidParameter(format!("bulk index {bulk} not in 1..={}", lay.dim)));
    }
    let sizes = cfg.subset.resolve(dims)?;
    let mut samples = sample_index_sets(dims, mode, &sizes, cfg.m0, rng)?;

    let mut scores = Vec::with_capacity(samples.len());
    for s in samples.iter_mut() {
        let cov = centered_covariance(&sum_fibers(x, mode, Some(s))?)?;
        let vals = eigenvalues_sym(&cov)?;
        let score = ratio_of(&vals, bulk).unwrap_or(1.0);
        s.er_score = Some(score);
        scores.push(score);
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(cfg.m);

    let mut aggregated = Matrix::zeros(lay.dim, lay.dim);
    for &i in &order {
        aggregated += centered_covariance(&sum_fibers(x, mode, Some(&samples[i]))?)?;
    }
    aggregated /= cfg.m as f64;

    let eig = eigen_sym(&aggregated)?;
    if eig.values[0] <= 0.0 {
        return Err(Error::DegenerateCovariance(format!(
            "every fibre sample of mode {mode} has zero covariance"
        )));
    }
    let method = if cfg.m == 1 { Method::MaxEigenRatio } else { Method::PreAveraged };
    let estimate = LoadingEstimate::from_eigen(mode, &eig, cfg.z, method);
    let chosen = order.iter().map(|&i| samples[i].clone()).collect();
    Ok(PreaverageOutput { estimate, chosen, chosen_indices: order, scores, aggregated })
}
