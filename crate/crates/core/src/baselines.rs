//! HOSVD and HOOI reference estimators. Time is the replication axis: each
//! mode's loading space comes from the covariance of the mode-k unfoldings
//! accumulated over `t`.

use crate::error::{Error, Result};
use crate::loading::{LoadingEstimate, Method};
use crate::tensor::{eigen_sym, second_moment, Matrix, Tensor, TensorSeries};

fn check_ranks(x: &TensorSeries, ranks: &[usize]) -> Result<()> {
    if ranks.len() != x.order() {
        return Err(Error::ShapeMismatch(format!("{} ranks for an order-{} series", ranks.len(), x.order())));
    }
    for (k, (&r, &d)) in ranks.iter().zip(x.dims()).enumerate() {
        if r == 0 || r > d {
            return Err(Error::RankTooLarge { mode: k, rank: r, dim: d });
        }
    }
    x.require_steps(2)
}

/// Leading eigenvectors of `(1/T) Σ_t M_t M_t^T` where `M_t` are the mode-k
/// unfoldings of `centered`.
fn unfolding_pca(centered: &TensorSeries, mode: usize, rank: usize, method: Method) -> Result<LoadingEstimate> {
    let stacked = centered.stacked_unfolding(mode)?;
    let mut cov = second_moment(&stacked);
    // second_moment divided by T·d_{-k}; rescale to the per-step average
    cov *= (stacked.ncols() / centered.len()) as f64;
    let eig = eigen_sym(&cov)?;
    if eig.values[0] <= 0.0 {
        return Err(Error::DegenerateCovariance(format!("mode-{mode} covariance is zero after centering")));
    }
    Ok(LoadingEstimate::from_eigen(mode, &eig, rank, method))
}

/// Higher-order SVD: per-mode PCA of the centered unfoldings.
pub fn hosvd(x: &TensorSeries, ranks: &[usize]) -> Result<Vec<LoadingEstimate>> {
    check_ranks(x, ranks)?;
    let centered = x.centered();
    (0..x.order()).map(|k| unfolding_pca(&centered, k, ranks[k], Method::Hosvd)).collect()
}

fn project_others(step: &Tensor, bases: &[Matrix], skip: usize) -> Result<Tensor> {
    let mut t = step.clone();
    for (j, u) in bases.iter().enumerate() {
        if j != skip {
            t = t.mode_product(&u.transpose(), j)?;
        }
    }
    Ok(t)
}

/// Higher-order orthogonal iteration started from [`hosvd`], with Jacobi
/// sweeps over the modes.
pub fn hooi(x: &TensorSeries, ranks: &[usize], iters: usize) -> Result<Vec<LoadingEstimate>> {
    if iters == 0 {
        return Err(Error::InvalidParameter("HOOI needs at least one sweep".into()));
    }
    let mut est = hosvd(x, ranks)?;
    let centered = x.centered();
    for _ in 0..iters {
        let bases: Vec<Matrix> = est.iter().map(|e| e.columns.clone()).collect();
        est = (0..x.order())
            .map(|k| {
                let projected = centered
                    .steps()
                    .iter()
                    .map(|s| project_others(s, &bases, k))
                    .collect::<Result<Vec<_>>>()?;
                let projected = TensorSeries::new(projected)?;
                unfolding_pca(&projected, k, ranks[k], Method::Hooi)
            })
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(est)
}

/// Tucker fit `Σ_t ‖(X_t − X̄) ×_1 U_1^T .. ×_K U_K^T‖_F²`.
pub fn tucker_fit(x: &TensorSeries, loadings: &[LoadingEstimate]) -> Result<f64> {
    let bases: Vec<Matrix> = loadings.iter().map(|e| e.columns.clone()).collect();
    let centered = x.centered();
    let mut fit = 0.0;
    for s in centered.steps() {
        let core = project_others(s, &bases, usize::MAX)?;
        fit += core.frobenius_norm().powi(2);
    }
    Ok(fit)
}
