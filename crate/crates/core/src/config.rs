//! Flat `key = value` configuration files. `#` starts a comment, lists are
//! comma-separated, unknown or repeated keys are errors.
//!
//! Simulation keys:
//!
//! | key | value |
//! |-----|-------|
//! | `setting` | `Ia`, `Ib`, `IIa`, `IIb`, `IIIa` or `IIIb`; omit for a custom design |
//! | `K` | tensor order (optional, checked against `d`) |
//! | `T` | number of time steps |
//! | `d` | dimensions, e.g. `40,40` |
//! | `ranks` | factor ranks per mode (default `2` each) |
//! | `r_e` | number of common noise series (default 10) |
//! | `u1`, `u2` | uniform loading bounds (required without `setting`) |
//! | `zeta` | strength exponents, modes separated by `;`, e.g. `0,0.2;0,0.2`; a single list applies to every mode |
//! | `ar_factor`, `ar_common`, `ar_idio` | five AR coefficients each |
//! | `psi_sparsity` | zero probability of `Ψ` entries (default 0.7) |
//! | `psi_layout` | `split` (fibre `ℓ` loads `Ψ/d_{-1}`, default) or `replicated` (every fibre loads `Ψ`) |
//! | `sigma_eig_bounds` | `lo,hi` eigenvalue range of `Σ_ℓ` (default `1,3`) |
//! | `noise_scale` | noise multiplier (default 1) |
//! | `seed` | base seed (default 0) |
//!
//! Benchmark files accept every simulation key plus:
//!
//! | key | value |
//! |-----|-------|
//! | `R` | replications (default 100) |
//! | `estimators` | subset of `pre,proj,hosvd,hooi,bcorth` (default all) |
//! | `m0`, `m`, `n_frac` | pre-averaging draws, kept draws, subset fraction |
//! | `iters` | refinement sweeps (default 30) |
//! | `B`, `p` | bootstrap draws and keep probability |
//! | `c_grid` | `lo:hi:n` or an explicit ascending list |
//! | `hooi_iters` | HOOI sweeps (default 30) |
//! | `timing` | `true`/`false`: record wall-clock times (default true) |

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::bench::{BenchConfig, Estimator};
use crate::dgp::{DgpConfig, Setting, AR_ORDER, COMMON_NOISE_AR, FACTOR_AR, IDIOSYNCRATIC_AR};
use crate::error::{Error, Result};
use crate::preaverage::{PreaverageConfig, SubsetSize};
use crate::projection::RefineConfig;
use crate::rank::{linear_grid, RankConfig};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim().to_string();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", n + 1)));
            }
            if entries.insert(k.clone(), (n + 1, v.trim().to_string())).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    pub fn take_raw(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        self.take_raw(key)
            .map(|v| v.parse::<T>().map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`"))))
            .transpose()
    }

    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        self.take_raw(key).map(|v| parse_list(&v, key)).transpose()
    }

    /// Fail on any key that was never taken.
    pub fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let unknown: Vec<String> =
            self.entries.iter().map(|(k, (line, _))| format!("`{k}` (line {line})")).collect();
        Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))))
    }
}

fn parse_list<T: FromStr>(v: &str, key: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<T>().map_err(|_| Error::Config(format!("invalid entry `{s}` for `{key}`")))
        })
        .collect()
}

fn ar_coeffs(kv: &mut KeyValues, key: &str, default: [f64; AR_ORDER]) -> Result<[f64; AR_ORDER]> {
    match kv.take_list::<f64>(key)? {
        None => Ok(default),
        Some(v) => v
            .try_into()
            .map_err(|v: Vec<f64>| Error::Config(format!("`{key}` needs {AR_ORDER} coefficients, got {}", v.len()))),
    }
}

/// `lo:hi:n` for an evenly spaced grid, otherwise an explicit list.
pub fn parse_c_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [lo, hi, n] => {
            let bad = || Error::Config(format!("invalid grid `{s}`"));
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if n == 0 || !(lo <= hi) {
                return Err(bad());
            }
            Ok(linear_grid(lo, hi, n))
        }
        [_] => parse_list(s, "c_grid"),
        _ => Err(Error::Config(format!("invalid grid `{s}`"))),
    }
}

fn parse_zeta(s: &str, ranks: &[usize]) -> Result<Vec<Vec<f64>>> {
    let per_mode: Vec<Vec<f64>> = s.split(';').map(|m| parse_list(m, "zeta")).collect::<Result<_>>()?;
    match per_mode.len() {
        1 => Ok(vec![per_mode[0].clone(); ranks.len()]),
        n if n == ranks.len() => Ok(per_mode),
        n => Err(Error::Config(format!("`zeta` lists {n} modes, expected {}", ranks.len()))),
    }
}

/// Simulation settings from the keys of `kv`; leftover keys are left in place.
pub fn dgp_from_kv(kv: &mut KeyValues) -> Result<DgpConfig> {
    let setting: Option<Setting> = kv.take_raw("setting").map(|s| s.parse()).transpose()?;
    let dims: Vec<usize> = kv.take_list("d")?.ok_or_else(|| Error::Config("missing `d`".into()))?;
    if let Some(k) = kv.take::<usize>("K")? {
        if k != dims.len() {
            return Err(Error::Config(format!("K={k} but `d` lists {} dims", dims.len())));
        }
    }
    let t: usize = kv.take("T")?.ok_or_else(|| Error::Config("missing `T`".into()))?;
    let seed: u64 = kv.take("seed")?.unwrap_or(0);
    let ranks: Vec<usize> = kv.take_list("ranks")?.unwrap_or_else(|| vec![2; dims.len()]);
    if ranks.len() != dims.len() {
        return Err(Error::Config(format!("`ranks` lists {} modes, expected {}", ranks.len(), dims.len())));
    }

    let mut cfg = match setting {
        Some(s) => DgpConfig::for_setting(s, dims, t, seed).with_ranks(ranks),
        None => {
            let mut cfg = DgpConfig::for_setting(Setting::Ia, dims, t, seed).with_ranks(ranks);
            cfg.setting = None;
            for key in ["u1", "u2", "zeta"] {
                if !kv.entries.contains_key(key) {
                    return Err(Error::Config(format!("`{key}` is required without `setting`")));
                }
            }
            cfg
        }
    };
    if let Some(u) = kv.take("u1")? {
        cfg.u1 = u;
    }
    if let Some(u) = kv.take("u2")? {
        cfg.u2 = u;
    }
    if let Some(z) = kv.take_raw("zeta") {
        cfg.zeta = parse_zeta(&z, &cfg.ranks)?;
    }
    if let Some(r) = kv.take("r_e")? {
        cfg.r_e = r;
    }
    cfg.ar_factor = ar_coeffs(kv, "ar_factor", FACTOR_AR)?;
    cfg.ar_common = ar_coeffs(kv, "ar_common", COMMON_NOISE_AR)?;
    cfg.ar_idio = ar_coeffs(kv, "ar_idio", IDIOSYNCRATIC_AR)?;
    if let Some(p) = kv.take("psi_sparsity")? {
        cfg.psi_sparsity = p;
    }
    if let Some(l) = kv.take("psi_layout")? {
        cfg.psi_layout = l;
    }
    if let Some(b) = kv.take_list::<f64>("sigma_eig_bounds")? {
        let [lo, hi] = b[..] else {
            return Err(Error::Config("`sigma_eig_bounds` needs two values".into()));
        };
        cfg.sigma_eig_bounds = (lo, hi);
    }
    if let Some(s) = kv.take("noise_scale")? {
        cfg.noise_scale = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_dgp_config(text: &str) -> Result<DgpConfig> {
    let mut kv = KeyValues::parse(text)?;
    let cfg = dgp_from_kv(&mut kv)?;
    kv.finish()?;
    Ok(cfg)
}

pub fn parse_bench_config(text: &str) -> Result<BenchConfig> {
    let mut kv = KeyValues::parse(text)?;
    let reps: usize = kv.take("R")?.unwrap_or(100);
    let estimators: Vec<Estimator> = match kv.take_list::<String>("estimators")? {
        None => Estimator::ALL.to_vec(),
        Some(names) => names.iter().map(|n| n.parse()).collect::<Result<_>>()?,
    };
    let mut pre = PreaverageConfig::default();
    if let Some(v) = kv.take("m0")? {
        pre.m0 = v;
    }
    if let Some(v) = kv.take("m")? {
        pre.m = v;
    }
    if let Some(v) = kv.take("n_frac")? {
        pre.subset = SubsetSize::Fraction(v);
    }
    let mut refine = RefineConfig::default();
    if let Some(v) = kv.take("iters")? {
        refine.max_iters = v;
    }
    let mut rank = RankConfig::default();
    if let Some(v) = kv.take("B")? {
        rank.replicates = v;
    }
    if let Some(v) = kv.take("p")? {
        rank.keep_prob = v;
    }
    if let Some(g) = kv.take_raw("c_grid") {
        rank.c_grid = parse_c_grid(&g)?;
    }
    let hooi_iters = kv.take("hooi_iters")?.unwrap_or(30);
    let timing = kv.take("timing")?.unwrap_or(true);
    let dgp = dgp_from_kv(&mut kv)?;
    kv.finish()?;
    let cfg = BenchConfig { seed: dgp.seed, dgp, reps, estimators, preaverage: pre, refine, rank, hooi_iters, timing };
    cfg.validate()?;
    Ok(cfg)
}
