//! Synthetic tensor factor data and CAPM residualization of return panels.
//!
//! `X_t = μ + F_t ×_1 A_1 .. ×_K A_K + E_t`, with every core entry an
//! independent standardized AR(5) stream and the noise built through its
//! mode-1 unfolding: fibre `ℓ` at time `t` is `s Ψ e_t + Σ_ℓ^{1/2} ε_{t,ℓ}`,
//! where `s` depends on [`PsiLayout`].

use std::fmt;
use std::str::FromStr;

use nalgebra::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor, TensorSeries, Vector};

pub const AR_ORDER: usize = 5;
pub const BURN_IN: usize = 500;

pub const FACTOR_AR: [f64; AR_ORDER] = [0.7, 0.3, -0.4, 0.2, -0.1];
pub const COMMON_NOISE_AR: [f64; AR_ORDER] = [-0.7, -0.3, -0.4, 0.2, 0.1];
pub const IDIOSYNCRATIC_AR: [f64; AR_ORDER] = [0.8, 0.4, -0.4, 0.2, -0.1];

/// Stationary AR(5) process with unit-variance Gaussian innovations,
/// rescaled to unit marginal variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Ar5 {
    coeffs: [f64; AR_ORDER],
    /// Autocovariances `γ_0..γ_5` of the unscaled process.
    autocov: [f64; AR_ORDER + 1],
}

impl Ar5 {
    pub fn new(coeffs: [f64; AR_ORDER]) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("AR coefficients must be finite".into()));
        }
        let radius = companion_spectral_radius(&coeffs);
        if radius >= 1.0 {
            return Err(Error::NonStationary { radius });
        }
        Ok(Self { coeffs, autocov: yule_walker_autocov(&coeffs)? })
    }

    pub fn coeffs(&self) -> [f64; AR_ORDER] {
        self.coeffs
    }

    /// Stationary variance before standardization.
    pub fn stationary_variance(&self) -> f64 {
        self.autocov[0]
    }

    /// Theoretical autocorrelation at `lag <= 5`.
    pub fn autocorrelation(&self, lag: usize) -> f64 {
        self.autocov[lag] / self.autocov[0]
    }

    /// `t` consecutive values after a burn-in, scaled to unit variance.
    pub fn sample<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Vec<f64> {
        let scale = self.autocov[0].sqrt().recip();
        let mut hist = [0.0f64; AR_ORDER];
        let mut out = Vec::with_capacity(t);
        for step in 0..BURN_IN + t {
            let z: f64 = StandardNormal.sample(rng);
            let x = z + self.coeffs.iter().zip(&hist).map(|(a, h)| a * h).sum::<f64>();
            hist.rotate_right(1);
            hist[0] = x;
            if step >= BURN_IN {
                out.push(x * scale);
            }
        }
        out
    }
}

fn companion_spectral_radius(coeffs: &[f64; AR_ORDER]) -> f64 {
    let mut c = Matrix::zeros(AR_ORDER, AR_ORDER);
    for (j, a) in coeffs.iter().enumerate() {
        c[(0, j)] = *a;
    }
    for i in 1..AR_ORDER {
        c[(i, i - 1)] = 1.0;
    }
    c.complex_eigenvalues().iter().map(|z: &Complex<f64>| z.norm()).fold(0.0, f64::max)
}

/// Solve `γ_0 − Σ φ_i γ_i = 1`, `γ_h − Σ φ_i γ_{|h−i|} = 0` for `h = 1..5`.
fn yule_walker_autocov(coeffs: &[f64; AR_ORDER]) -> Result<[f64; AR_ORDER + 1]> {
    let n = AR_ORDER + 1;
    let mut m = Matrix::identity(n, n);
    let mut rhs = Vector::zeros(n);
    rhs[0] = 1.0;
    for h in 0..n {
        for (i, phi) in coeffs.iter().enumerate() {
            let lag = (h as isize - (i as isize + 1)).unsigned_abs();
            m[(h, lag)] -= phi;
        }
    }
    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NonStationary { radius: f64::NAN })?;
    if !(sol[0] > 0.0) {
        return Err(Error::NonStationary { radius: f64::NAN });
    }
    let mut out = [0.0; AR_ORDER + 1];
    out.copy_from_slice(sol.as_slice());
    Ok(out)
}

/// `t` standardized AR(5) values.
pub fn gen_ar5<R: Rng + ?Sized>(t: usize, coeffs: [f64; AR_ORDER], rng: &mut R) -> Result<Vec<f64>> {
    Ok(Ar5::new(coeffs)?.sample(t, rng))
}

/// `d × r` loadings: entries i.i.d. Uniform(u1, u2), column `j` scaled by `d^{-ζ_j}`.
pub fn gen_loadings<R: Rng + ?Sized>(d: usize, r: usize, u1: f64, u2: f64, zeta: &[f64], rng: &mut R) -> Result<Matrix> {
    if !(u1 < u2) {
        return Err(Error::InvalidParameter(format!("need u1 < u2, got ({u1}, {u2})")));
    }
    if zeta.len() != r {
        return Err(Error::InvalidParameter(format!("{} strength exponents for {r} factors", zeta.len())));
    }
    let unif = Uniform::new(u1, u2).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut data = Vec::with_capacity(d * r);
    for &z in zeta {
        let scale = (d as f64).powf(-z);
        data.extend((0..d).map(|_| unif.sample(rng) * scale));
    }
    Ok(Matrix::from_column_slice(d, r, &data))
}

/// Haar-like random orthogonal matrix: QR of a Gaussian matrix with the
/// columns of `Q` flipped so that `diag(R) > 0`.
pub fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Matrix {
    let g: Vec<f64> = (0..n * n).map(|_| StandardNormal.sample(rng)).collect();
    let qr = Matrix::from_column_slice(n, n, &g).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Simulation profiles: loading bounds and per-factor strength exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setting {
    Ia,
    Ib,
    IIa,
    IIb,
    IIIa,
    IIIb,
}

impl Setting {
    pub const ALL: [Setting; 6] = [Setting::Ia, Setting::Ib, Setting::IIa, Setting::IIb, Setting::IIIa, Setting::IIIb];

    pub fn bounds(self) -> (f64, f64) {
        match self {
            Setting::Ia | Setting::IIa | Setting::IIIa => (-2.0, 2.0),
            Setting::Ib | Setting::IIb | Setting::IIIb => (0.0, 2.0),
        }
    }

    /// Strength exponents for `r` factors. The second exponent repeats for
    /// factors beyond the second.
    pub fn zeta(self, r: usize) -> Vec<f64> {
        let (first, rest) = match self {
            Setting::Ia | Setting::Ib => (0.0, 0.0),
            Setting::IIa | Setting::IIb => (0.0, 0.2),
            Setting::IIIa | Setting::IIIb => (0.1, 0.2),
        };
        (0..r).map(|j| if j == 0 { first } else { rest }).collect()
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Ia => "Ia",
            Setting::Ib => "Ib",
            Setting::IIa => "IIa",
            Setting::IIb => "IIb",
            Setting::IIIa => "IIIa",
            Setting::IIIb => "IIIb",
        })
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Setting::ALL
            .into_iter()
            .find(|t| t.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown setting `{s}`")))
    }
}

/// How the shared `d_1 × r_e` matrix `Ψ` enters each mode-1 fibre.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PsiLayout {
    /// `Ψ` is the sum of the per-fibre loadings: fibre `ℓ` gets `Ψ / d_{-1}`,
    /// which keeps the cross-fibre correlation weak.
    #[default]
    Split,
    /// Every fibre gets the full `Ψ`. Acts as a pervasive extra factor.
    Replicated,
}

impl FromStr for PsiLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split" => Ok(PsiLayout::Split),
            "replicated" => Ok(PsiLayout::Replicated),
            _ => Err(Error::Config(format!("unknown psi layout `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DgpConfig {
    pub setting: Option<Setting>,
    pub dims: Vec<usize>,
    pub t: usize,
    pub ranks: Vec<usize>,
    /// Number of common noise series `e_t`.
    pub r_e: usize,
    pub u1: f64,
    pub u2: f64,
    /// `zeta[k][j]`: strength exponent of factor `j` in mode `k`.
    pub zeta: Vec<Vec<f64>>,
    pub ar_factor: [f64; AR_ORDER],
    pub ar_common: [f64; AR_ORDER],
    pub ar_idio: [f64; AR_ORDER],
    /// Probability that an entry of `Ψ` is set to zero.
    pub psi_sparsity: f64,
    pub psi_layout: PsiLayout,
    /// Bounds of the uniform eigenvalues of each `Σ_ℓ`.
    pub sigma_eig_bounds: (f64, f64),
    /// Multiplier on the noise tensor; 0 gives noiseless data.
    pub noise_scale: f64,
    pub seed: u64,
}

impl DgpConfig {
    /// Configuration of a named profile with `r_k = 2` and `r_e = 10`.
    pub fn for_setting(setting: Setting, dims: Vec<usize>, t: usize, seed: u64) -> Self {
        let ranks = vec![2; dims.len()];
        let (u1, u2) = setting.bounds();
        let zeta = ranks.iter().map(|&r| setting.zeta(r)).collect();
        Self {
            setting: Some(setting),
            dims,
            t,
            ranks,
            r_e: 10,
            u1,
            u2,
            zeta,
            ar_factor: FACTOR_AR,
            ar_common: COMMON_NOISE_AR,
            ar_idio: IDIOSYNCRATIC_AR,
            psi_sparsity: 0.7,
            psi_layout: PsiLayout::Split,
            sigma_eig_bounds: (1.0, 3.0),
            noise_scale: 1.0,
            seed,
        }
    }

    /// Replace the ranks, recomputing the profile exponents when a profile is set.
    pub fn with_ranks(mut self, ranks: Vec<usize>) -> Self {
        if let Some(s) = self.setting {
            self.zeta = ranks.iter().map(|&r| s.zeta(r)).collect();
        }
        self.ranks = ranks;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.dims.len();
        if k == 0 || self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!("invalid dims {:?}", self.dims)));
        }
        if self.t < 2 {
            return Err(Error::Config(format!("T must be at least 2, got {}", self.t)));
        }
        if self.ranks.len() != k || self.zeta.len() != k {
            return Err(Error::Config("ranks and zeta need one entry per mode".into()));
        }
        for (m, (&r, &d)) in self.ranks.iter().zip(&self.dims).enumerate() {
            if r == 0 || r > d {
                return Err(Error::Config(format!("rank {r} of mode {m} not in 1..={d}")));
            }
            if self.zeta[m].len() != r {
                return Err(Error::Config(format!("mode {m} needs {r} strength exponents")));
            }
        }
        if self.zeta.iter().flatten().any(|z| !(0.0..=0.5).contains(z)) {
            return Err(Error::Config("strength exponents must lie in [0, 0.5]".into()));
        }
        if !(self.u1 < self.u2) {
            return Err(Error::Config(format!("need u1 < u2, got ({}, {})", self.u1, self.u2)));
        }
        if !(0.0..=1.0).contains(&self.psi_sparsity) {
            return Err(Error::Config("psi_sparsity must lie in [0, 1]".into()));
        }
        let (lo, hi) = self.sigma_eig_bounds;
        if !(lo > 0.0 && lo <= hi) {
            return Err(Error::Config(format!("invalid eigenvalue bounds ({lo}, {hi})")));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::Config("noise_scale must be finite and non-negative".into()));
        }
        for c in [self.ar_factor, self.ar_common, self.ar_idio] {
            Ar5::new(c).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Multiplier of `Ψ` inside each fibre.
    pub fn psi_fibre_scale(&self) -> f64 {
        match self.psi_layout {
            PsiLayout::Split => 1.0 / self.dims[1..].iter().product::<usize>() as f64,
            PsiLayout::Replicated => 1.0,
        }
    }
}

/// Realized noise series with the matrices that generated it.
#[derive(Debug, Clone)]
pub struct NoiseDraw {
    pub series: TensorSeries,
    /// `d_1 × r_e`, shared by every fibre (before the layout scaling).
    pub psi: Matrix,
    /// `Σ_ℓ` for each mode-1 fibre `ℓ`.
    pub sigmas: Vec<Matrix>,
}

/// Noise tensors `E_t` built column by column of their mode-1 unfolding:
/// fibre `ℓ` is `s Ψ e_t + Σ_ℓ^{1/2} ε_{t,ℓ}` with `s` from [`PsiLayout`].
pub fn gen_noise_series<R: Rng + ?Sized>(cfg: &DgpConfig, rng: &mut R) -> Result<NoiseDraw> {
    cfg.validate()?;
    let d1 = cfg.dims[0];
    let n_fibres: usize = cfg.dims[1..].iter().product();
    let t = cfg.t;

    let mut psi = Matrix::zeros(d1, cfg.r_e);
    for j in 0..cfg.r_e {
        for i in 0..d1 {
            let v: f64 = StandardNormal.sample(rng);
            if !rng.random_bool(cfg.psi_sparsity) {
                psi[(i, j)] = v;
            }
        }
    }

    let (lo, hi) = cfg.sigma_eig_bounds;
    let mut sigmas = Vec::with_capacity(n_fibres);
    let mut roots = Vec::with_capacity(n_fibres);
    for _ in 0..n_fibres {
        let vals: Vec<f64> = (0..d1).map(|_| if lo < hi { rng.random_range(lo..hi) } else { lo }).collect();
        let v = random_orthogonal(d1, rng);
        let vt = v.transpose();
        let scaled = |f: fn(f64) -> f64| {
            let mut m = v.clone();
            for (j, l) in vals.iter().enumerate() {
                m.column_mut(j).scale_mut(f(*l));
            }
            m * &vt
        };
        sigmas.push(scaled(|l| l));
        roots.push(scaled(f64::sqrt));
    }

    let common = Ar5::new(cfg.ar_common)?;
    let idio = Ar5::new(cfg.ar_idio)?;
    let mut e = Matrix::zeros(cfg.r_e, t);
    for j in 0..cfg.r_e {
        for (s, v) in common.sample(t, rng).into_iter().enumerate() {
            e[(j, s)] = v;
        }
    }
    let shared = (&psi * &e) * cfg.psi_fibre_scale();

    let len = d1 * n_fibres;
    let mut data = vec![0.0; t * len];
    for (l, root) in roots.iter().enumerate() {
        let mut eps = Matrix::zeros(d1, t);
        for i in 0..d1 {
            for (s, v) in idio.sample(t, rng).into_iter().enumerate() {
                eps[(i, s)] = v;
            }
        }
        let xi = root * eps + &shared;
        for s in 0..t {
            let dst = &mut data[s * len + l * d1..s * len + (l + 1) * d1];
            for (o, v) in dst.iter_mut().zip(xi.column(s).iter()) {
                *o = v * cfg.noise_scale;
            }
        }
    }
    Ok(NoiseDraw { series: TensorSeries::from_flat(cfg.dims.clone(), t, &data)?, psi, sigmas })
}

/// Simulated data together with the quantities needed to score estimates.
#[derive(Debug, Clone)]
pub struct DgpGroundTruth {
    pub loadings: Vec<Matrix>,
    /// Orthonormal bases of the loading spaces (left singular vectors).
    pub bases: Vec<Matrix>,
    pub mean: Tensor,
    pub series: TensorSeries,
}

/// Orthonormal basis of the column space of a full-column-rank matrix.
pub fn column_basis(a: &Matrix) -> Matrix {
    let r = a.ncols().min(a.nrows());
    let svd = a.clone().svd(true, false);
    svd.u.expect("left singular vectors were requested").columns(0, r).into_owned()
}

/// Draw one data set from `cfg`, seeded by `cfg.seed`.
pub fn simulate_setting(cfg: &DgpConfig) -> Result<DgpGroundTruth> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    simulate_with_rng(cfg, &mut rng)
}

pub fn simulate_with_rng<R: Rng + ?Sized>(cfg: &DgpConfig, rng: &mut R) -> Result<DgpGroundTruth> {
    cfg.validate()?;
    let mean = Tensor::from_fn(cfg.dims.clone(), |_| StandardNormal.sample(rng))?;
    let loadings = cfg
        .dims
        .iter()
        .zip(&cfg.ranks)
        .zip(&cfg.zeta)
        .map(|((&d, &r), z)| gen_loadings(d, r, cfg.u1, cfg.u2, z, rng))
        .collect::<Result<Vec<_>>>()?;

    let factor_ar = Ar5::new(cfg.ar_factor)?;
    let n_core: usize = cfg.ranks.iter().product();
    let streams: Vec<Vec<f64>> = (0..n_core).map(|_| factor_ar.sample(cfg.t, rng)).collect();

    let noise = if cfg.noise_scale > 0.0 { Some(gen_noise_series(cfg, rng)?) } else { None };

    let mut steps = Vec::with_capacity(cfg.t);
    for s in 0..cfg.t {
        let core = Tensor::new(cfg.ranks.clone(), streams.iter().map(|st| st[s]).collect())?;
        let mut signal = core;
        for (k, a) in loadings.iter().enumerate() {
            signal = signal.mode_product(a, k)?;
        }
        let mut data = signal.into_data();
        for (x, m) in data.iter_mut().zip(mean.data()) {
            *x += m;
        }
        if let Some(n) = &noise {
            for (x, e) in data.iter_mut().zip(n.series.steps()[s].data()) {
                *x += e;
            }
        }
        steps.push(Tensor::new(cfg.dims.clone(), data)?);
    }
    let bases = loadings.iter().map(column_basis).collect();
    Ok(DgpGroundTruth { loadings, bases, mean, series: TensorSeries::new(steps)? })
}

/// Least-squares market betas and the residual panel.
#[derive(Debug, Clone)]
pub struct CapmFit {
    pub betas: Vec<f64>,
    /// `n × T`: `y_t − ȳ − β (x_t − x̄)`.
    pub residuals: Matrix,
}

/// Remove the market factor from an `n × T` panel `y` given market returns `x`.
pub fn capm_residuals(y: &Matrix, x: &[f64]) -> Result<CapmFit> {
    let t = x.len();
    if y.ncols() != t {
        return Err(Error::ShapeMismatch(format!("panel has {} periods, market has {t}", y.ncols())));
    }
    if t < 2 {
        return Err(Error::InsufficientSteps { required: 2, actual: t });
    }
    let xbar = x.iter().sum::<f64>() / t as f64;
    let xc: Vec<f64> = x.iter().map(|v| v - xbar).collect();
    let sxx: f64 = xc.iter().map(|v| v * v).sum();
    let scale: f64 = x.iter().map(|v| v * v).sum();
    if !(sxx > 1e-24 * scale) || sxx == 0.0 {
        return Err(Error::InvalidParameter("market series is constant".into()));
    }
    let ybar = y.column_mean();
    let mut residuals = y.clone();
    for mut col in residuals.column_iter_mut() {
        col -= &ybar;
    }
    let betas: Vec<f64> = (0..y.nrows())
        .map(|i| residuals.row(i).iter().zip(&xc).map(|(a, b)| a * b).sum::<f64>() / sxx)
        .collect();
    for (s, xs) in xc.iter().enumerate() {
        for (i, b) in betas.iter().enumerate() {
            residuals[(i, s)] -= b * xs;
        }
    }
    Ok(CapmFit { betas, residuals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_coefficients_give_white_noise() {
        let ar = Ar5::new([0.0; 5]).unwrap();
        assert!((ar.stationary_variance() - 1.0).abs() < 1e-14);
        let a = ar.sample(50, &mut ChaCha8Rng::seed_from_u64(1));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b: Vec<f64> = (0..BURN_IN + 50).map(|_| StandardNormal.sample(&mut rng)).skip(BURN_IN).collect();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn non_stationary_is_rejected() {
        assert!(matches!(Ar5::new([1.1, 0.0, 0.0, 0.0, 0.0]), Err(Error::NonStationary { .. })));
        assert!(matches!(Ar5::new([0.5, 0.5, 0.0, 0.0, 0.0]), Err(Error::NonStationary { .. })));
    }

    #[test]
    fn ar1_closed_form() {
        let ar = Ar5::new([0.6, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((ar.stationary_variance() - 1.0 / (1.0 - 0.36)).abs() < 1e-12);
        assert!((ar.autocorrelation(1) - 0.6).abs() < 1e-12);
        assert!((ar.autocorrelation(3) - 0.216).abs() < 1e-12);
    }

    #[test]
    fn loading_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = gen_loadings(4, 2, -1.0, 1.0, &[0.0, 0.0], &mut rng).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = gen_loadings(4, 2, -1.0, 1.0, &[0.5, 0.0], &mut rng).unwrap();
        for i in 0..4 {
            assert!((a[(i, 0)] - 0.5 * b[(i, 0)]).abs() < 1e-15);
            assert_eq!(a[(i, 1)], b[(i, 1)]);
        }
        assert!(gen_loadings(4, 1, 1.0, 1.0, &[0.0], &mut rng).is_err());
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let q = random_orthogonal(6, &mut ChaCha8Rng::seed_from_u64(8));
        assert!((q.transpose() * &q - Matrix::identity(6, 6)).amax() < 1e-12);
    }

    #[test]
    fn settings_parse_and_map() {
        for s in Setting::ALL {
            assert_eq!(s.to_string().parse::<Setting>().unwrap(), s);
        }
        assert!("IV".parse::<Setting>().is_err());
        assert_eq!(Setting::IIIa.zeta(2), vec![0.1, 0.2]);
        assert_eq!(Setting::IIb.bounds(), (0.0, 2.0));
    }

    #[test]
    fn sparsity_one_removes_common_noise() {
        let mut cfg = DgpConfig::for_setting(Setting::Ia, vec![4, 3], 20, 1);
        cfg.psi_sparsity = 1.0;
        let n = gen_noise_series(&cfg, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(n.psi, Matrix::zeros(4, 10));
        assert_eq!(n.sigmas.len(), 3);
    }

    #[test]
    fn sigma_spectra_are_in_bounds() {
        let cfg = DgpConfig::for_setting(Setting::Ia, vec![5, 4], 10, 1);
        let n = gen_noise_series(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for s in &n.sigmas {
            assert!((s - s.transpose()).amax() < 1e-12);
            let vals = crate::tensor::eigenvalues_sym(s).unwrap();
            assert!(vals.iter().all(|v| *v >= 1.0 - 1e-10 && *v <= 3.0 + 1e-10));
        }
    }

    #[test]
    fn noiseless_simulation_has_unit_multilinear_rank() {
        let mut cfg = DgpConfig::for_setting(Setting::Ia, vec![5, 4, 3], 12, 7).with_ranks(vec![1, 1, 1]);
        cfg.noise_scale = 0.0;
        let truth = simulate_setting(&cfg).unwrap();
        for s in truth.series.steps() {
            let c: Vec<f64> = s.data().iter().zip(truth.mean.data()).map(|(x, m)| x - m).collect();
            let c = Tensor::new(vec![5, 4, 3], c).unwrap();
            for k in 0..3 {
                let vals = crate::tensor::eigenvalues_sym(&{
                    let u = c.unfold(k).unwrap();
                    &u * u.transpose()
                })
                .unwrap();
                assert!(vals.iter().skip(1).all(|v| v.abs() <= 1e-10 * vals[0].max(1.0)));
            }
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let cfg = DgpConfig::for_setting(Setting::IIb, vec![6, 5], 15, 99);
        let a = simulate_setting(&cfg).unwrap();
        let b = simulate_setting(&cfg).unwrap();
        assert_eq!(a.series, b.series);
        assert!(a.series.to_flat().iter().all(|v| v.is_finite()));
        for (u, l) in a.bases.iter().zip(&a.loadings) {
            assert!((u.transpose() * u - Matrix::identity(2, 2)).amax() < 1e-10);
            // span(U) = span(A): projecting A onto U loses nothing
            assert!((u * (u.transpose() * l) - l).amax() < 1e-10);
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = DgpConfig::for_setting(Setting::Ia, vec![4, 4], 10, 0);
        cfg.zeta[0][1] = 0.7;
        assert!(cfg.validate().is_err());
        let mut cfg = DgpConfig::for_setting(Setting::Ia, vec![4, 4], 1, 0);
        assert!(cfg.validate().is_err());
        cfg.t = 5;
        cfg.ar_idio = [1.2, 0.0, 0.0, 0.0, 0.0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn capm_perfect_fit_and_constant_market() {
        let x = [0.5, -1.0, 2.0, 0.1];
        let y = Matrix::from_fn(3, 4, |_, t| 2.0 * x[t]);
        let fit = capm_residuals(&y, &x).unwrap();
        assert!(fit.betas.iter().all(|b| (b - 2.0).abs() < 1e-12));
        assert!(fit.residuals.amax() < 1e-12);
        assert!(capm_residuals(&y, &[0.3; 4]).is_err());
        assert!(capm_residuals(&y, &x[..3]).is_err());
    }

    #[test]
    fn capm_residuals_are_orthogonal_to_market() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x: Vec<f64> = (0..200).map(|_| StandardNormal.sample(&mut rng)).collect();
        let y = Matrix::from_fn(5, 200, |i, t| {
            let z: f64 = StandardNormal.sample(&mut rng);
            1.0 + i as f64 + (i as f64 - 2.0) * x[t] + z
        });
        let fit = capm_residuals(&y, &x).unwrap();
        let xbar = x.iter().sum::<f64>() / 200.0;
        for i in 0..5 {
            let r = fit.residuals.row(i);
            assert!(r.mean().abs() < 1e-12);
            let cov: f64 = r.iter().zip(&x).map(|(a, b)| a * (b - xbar)).sum::<f64>() / 200.0;
            assert!(cov.abs() < 1e-12);
        }
    }
}
