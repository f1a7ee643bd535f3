//! Iterative projection refinement of the strongest direction per mode and
//! re-estimation of the full loading spaces from projected data.
//!
//! Each sweep projects the centered unfolding `mat_k(X_t − X̄)` onto the
//! Kronecker product of the other modes' current directions, which collapses
//! the tensor series to a `d_k`-dimensional series with an amplified signal.

use crate::error::{Error, Result};
use crate::loading::{LoadingEstimate, Method};
use crate::tensor::{eigen_sym, kron_vectors_minus_k, second_moment, EigenDecomposition, Matrix, TensorSeries, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateOrder {
    /// Every mode updates from the previous sweep's directions.
    #[default]
    Jacobi,
    /// Modes update in order, each using the freshest directions.
    GaussSeidel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub max_iters: usize,
    /// Stop once the largest sign-aligned direction change drops below this.
    pub tolerance: f64,
    pub order: UpdateOrder,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self { max_iters: 30, tolerance: 1e-8, order: UpdateOrder::Jacobi }
    }
}

/// Directions after `iteration` refinement sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionState {
    pub iteration: usize,
    /// One unit vector per mode.
    pub directions: Vec<Vector>,
    /// Largest sign-aligned direction change of each sweep.
    pub history: Vec<f64>,
}

impl ProjectionState {
    pub fn new(directions: Vec<Vector>) -> Result<Self> {
        let directions = directions
            .into_iter()
            .enumerate()
            .map(|(k, v)| {
                let n = v.norm();
                if n == 0.0 || !n.is_finite() {
                    return Err(Error::InvalidParameter(format!("initial direction of mode {k} is zero")));
                }
                Ok(v / n)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { iteration: 0, directions, history: Vec::new() })
    }

    /// `q_{-k}`: Kronecker product of every direction except mode `k`'s.
    pub fn direction_minus(&self, mode: usize) -> Result<Vector> {
        kron_vectors_minus_k(&self.directions, mode)
    }
}

/// `min(‖a − b‖, ‖a + b‖)`.
pub fn sign_aligned_distance(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm().min((a + b).norm())
}

/// Projected series `y_t = mat_k(X_t − X̄) q_{-k}` as a `d_k × T` matrix.
pub fn project_data(x: &TensorSeries, mode: usize, q_minus: &Vector) -> Result<Matrix> {
    x.require_steps(2)?;
    if q_minus.norm() == 0.0 {
        return Err(Error::InvalidParameter("projection vector is zero".into()));
    }
    x.centered().contract_all_but(mode, q_minus)
}

/// Eigen-analysis of `(1/T) Σ y_t y_t^T` for already-centered data.
fn projected_eigen(centered: &TensorSeries, mode: usize, q_minus: &Vector) -> Result<EigenDecomposition> {
    let y = centered.contract_all_but(mode, q_minus)?;
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::DegenerateProjection { mode });
    }
    eigen_sym(&second_moment(&y))
}

fn check_directions(x: &TensorSeries, dirs: &[Vector]) -> Result<()> {
    if dirs.len() != x.order() {
        return Err(Error::ShapeMismatch(format!(
            "{} directions for an order-{} series",
            dirs.len(),
            x.order()
        )));
    }
    for (k, (v, &d)) in dirs.iter().zip(x.dims()).enumerate() {
        if v.len() != d {
            return Err(Error::ShapeMismatch(format!("direction of mode {k} has length {}, expected {d}", v.len())));
        }
    }
    Ok(())
}

/// Run up to `cfg.max_iters` refinement sweeps from `init`.
pub fn refine_directions(x: &TensorSeries, init: &[Vector], cfg: &RefineConfig) -> Result<ProjectionState> {
    x.require_steps(2)?;
    check_directions(x, init)?;
    if cfg.max_iters == 0 {
        return Err(Error::InvalidParameter("at least one refinement sweep is required".into()));
    }
    let centered = x.centered();
    let mut state = ProjectionState::new(init.to_vec())?;
    for _ in 0..cfg.max_iters {
        let previous = state.directions.clone();
        let mut next = previous.clone();
        for k in 0..x.order() {
            let source = match cfg.order {
                UpdateOrder::Jacobi => &previous,
                UpdateOrder::GaussSeidel => &next,
            };
            let q_minus = kron_vectors_minus_k(source, k)?;
            let eig = projected_eigen(&centered, k, &q_minus)?;
            next[k] = eig.vectors.column(0).into_owned();
        }
        let change = next
            .iter()
            .zip(&previous)
            .map(|(a, b)| sign_aligned_distance(a, b))
            .fold(0.0, f64::max);
        state.directions = next;
        state.iteration += 1;
        state.history.push(change);
        if change < cfg.tolerance {
            break;
        }
    }
    Ok(state)
}

/// Top-`rank` eigenvectors of the projected second moment built from the
/// refined directions of the other modes.
pub fn estimate_loading_space(
    x: &TensorSeries,
    mode: usize,
    state: &ProjectionState,
    rank: usize,
) -> Result<LoadingEstimate> {
    x.require_steps(2)?;
    check_directions(x, &state.directions)?;
    let d = x.dims()[mode];
    if rank == 0 || rank > d {
        return Err(Error::RankTooLarge { mode, rank, dim: d });
    }
    let eig = projected_eigen(&x.centered(), mode, &state.direction_minus(mode)?)?;
    Ok(LoadingEstimate::from_eigen(mode, &eig, rank, Method::Projected))
}
