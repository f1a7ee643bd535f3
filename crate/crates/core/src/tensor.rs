//! Dense order-K tensors and the linear-algebra primitives the estimators
//! are built on.
//!
//! Storage is generalized column-major: index `i_1` varies fastest and
//! `i_K` slowest. Modes are 0-based throughout the Rust API, so mode `k`
//! here is mode `k + 1` in the usual mathematical notation.
//!
//! The mode-k unfolding places the fibre at multi-index
//! `(i_1, .., i_{k-1}, ., i_{k+1}, .., i_K)` in column
//! `sum_{l != k} i_l * J_l` with `J_l = prod_{m < l, m != k} d_m`. With this
//! ordering `C_(k) = A_k F_(k) (A_K ⊗ .. ⊗ A_{k+1} ⊗ A_{k-1} ⊗ .. ⊗ A_1)^T`
//! holds exactly for `C = F ×_1 A_1 .. ×_K A_K`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Position of a mode inside the flat storage: `inner` is the product of
/// the dimensions before the mode, `outer` the product after it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ModeLayout {
    pub inner: usize,
    pub dim: usize,
    pub outer: usize,
}

impl ModeLayout {
    pub fn new(dims: &[usize], mode: usize) -> Result<Self> {
        if mode >= dims.len() {
            return Err(Error::InvalidMode { mode, order: dims.len() });
        }
        Ok(Self {
            inner: dims[..mode].iter().product(),
            dim: dims[mode],
            outer: dims[mode + 1..].iter().product(),
        })
    }

    /// Number of mode-k fibres, `d_{-k}`.
    pub fn fibres(&self) -> usize {
        self.inner * self.outer
    }

    /// Flat offset of the first entry of unfolding column `col`; successive
    /// entries of that fibre are `inner` apart.
    #[inline]
    pub fn fibre_offset(&self, col: usize) -> usize {
        let a = col % self.inner;
        let b = col / self.inner;
        a + b * self.inner * self.dim
    }
}

fn check_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::ShapeMismatch("tensor order must be at least 1".into()));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::ShapeMismatch(format!("zero dimension in {dims:?}")));
    }
    Ok(dims.iter().product())
}

/// Dense order-K tensor of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = check_dims(&dims)?;
        if data.len() != len {
            return Err(Error::ShapeMismatch(format!(
                "dims {dims:?} need {len} entries, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len = check_dims(&dims)?;
        Ok(Self { dims, data: vec![0.0; len] })
    }

    /// Build a tensor by evaluating `f` at every multi-index, in storage order.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = check_dims(&dims)?;
        let mut idx = vec![0usize; dims.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (i, d) in idx.iter_mut().zip(&dims) {
                *i += 1;
                if *i < *d {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Flat storage offset of a multi-index.
    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        let mut off = 0;
        let mut stride = 1;
        for (i, d) in index.iter().zip(&self.dims) {
            off += i * stride;
            stride *= d;
        }
        off
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    /// Column-major vectorization (stacked mode-1 fibres).
    pub fn vectorize(&self) -> Vector {
        Vector::from_column_slice(&self.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, c: f64) -> Tensor {
        Tensor { dims: self.dims.clone(), data: self.data.iter().map(|x| x * c).collect() }
    }

    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        unfold(self, mode)
    }

    pub fn mode_product(&self, a: &Matrix, mode: usize) -> Result<Tensor> {
        kmode_product(self, a, mode)
    }
}

/// Mode-k unfolding: a `d_k × d_{-k}` matrix whose columns are the mode-k fibres.
pub fn unfold(t: &Tensor, mode: usize) -> Result<Matrix> {
    let lay = ModeLayout::new(&t.dims, mode)?;
    if mode == 0 {
        return Ok(Matrix::from_column_slice(lay.dim, lay.fibres(), &t.data));
    }
    let mut m = Matrix::zeros(lay.dim, lay.fibres());
    for col in 0..lay.fibres() {
        let off = lay.fibre_offset(col);
        for i in 0..lay.dim {
            m[(i, col)] = t.data[off + i * lay.inner];
        }
    }
    Ok(m)
}

/// Inverse of [`unfold`].
pub fn fold(m: &Matrix, dims: &[usize], mode: usize) -> Result<Tensor> {
    let len = check_dims(dims)?;
    let lay = ModeLayout::new(dims, mode)?;
    if m.nrows() != lay.dim || m.ncols() != lay.fibres() {
        return Err(Error::ShapeMismatch(format!(
            "cannot fold a {}x{} matrix into dims {dims:?} along mode {mode}",
            m.nrows(),
            m.ncols()
        )));
    }
    let mut data = vec![0.0; len];
    for col in 0..lay.fibres() {
        let off = lay.fibre_offset(col);
        for i in 0..lay.dim {
            data[off + i * lay.inner] = m[(i, col)];
        }
    }
    Ok(Tensor { dims: dims.to_vec(), data })
}

/// k-mode product `t ×_k a`: every mode-k fibre is multiplied by `a`.
pub fn kmode_product(t: &Tensor, a: &Matrix, mode: usize) -> Result<Tensor> {
    let lay = ModeLayout::new(&t.dims, mode)?;
    if a.ncols() != lay.dim {
        return Err(Error::ShapeMismatch(format!(
            "mode-{mode} product needs {} columns, matrix has {}",
            lay.dim,
            a.ncols()
        )));
    }
    let product = a * unfold(t, mode)?;
    let mut dims = t.dims.clone();
    dims[mode] = a.nrows();
    fold(&product, &dims, mode)
}

/// `M_K ⊗ .. ⊗ M_{k+1} ⊗ M_{k-1} ⊗ .. ⊗ M_1`; a 1×1 identity when only
/// mode `k` is present.
pub fn kron_chain_minus_k(mats: &[Matrix], mode: usize) -> Result<Matrix> {
    if mode >= mats.len() {
        return Err(Error::InvalidMode { mode, order: mats.len() });
    }
    let mut acc = Matrix::identity(1, 1);
    for (l, m) in mats.iter().enumerate().rev() {
        if l != mode {
            acc = acc.kronecker(m);
        }
    }
    Ok(acc)
}

/// Kronecker chain of vectors skipping `mode`, in descending mode order.
pub fn kron_vectors_minus_k(vecs: &[Vector], mode: usize) -> Result<Vector> {
    if mode >= vecs.len() {
        return Err(Error::InvalidMode { mode, order: vecs.len() });
    }
    let mut acc = vec![1.0];
    for (l, v) in vecs.iter().enumerate().rev() {
        if l == mode {
            continue;
        }
        let mut next = Vec::with_capacity(acc.len() * v.len());
        for a in &acc {
            next.extend(v.iter().map(|b| a * b));
        }
        acc = next;
    }
    Ok(Vector::from_vec(acc))
}

/// Centered covariance `(1/T) Σ_t (x_t − x̄)(x_t − x̄)^T` of the columns of
/// `obs` (an `n × T` matrix, one observation per column).
pub fn centered_covariance(obs: &Matrix) -> Result<Matrix> {
    let t = obs.ncols();
    if t < 2 {
        return Err(Error::InsufficientSteps { required: 2, actual: t });
    }
    let mean = obs.column_mean();
    let mut centered = obs.clone();
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }
    Ok(second_moment(&centered))
}

/// Uncentered second moment `(1/T) Σ_t y_t y_t^T` of the columns of `obs`.
pub fn second_moment(obs: &Matrix) -> Matrix {
    let t = obs.ncols().max(1) as f64;
    let mut s = obs * obs.transpose();
    s /= t;
    symmetrize(&mut s);
    s
}

fn symmetrize(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Eigen-pairs of a symmetric matrix, values descending and vectors
/// sign-fixed so the largest-magnitude entry of each column is non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub values: Vector,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    /// Leading `z` eigenvectors as an `n × z` matrix.
    pub fn leading_vectors(&self, z: usize) -> Matrix {
        self.vectors.columns(0, z).into_owned()
    }

    pub fn leading_values(&self, z: usize) -> Vec<f64> {
        self.values.iter().take(z).copied().collect()
    }
}

fn prepared(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut s = m.clone();
    symmetrize(&mut s);
    Ok(s)
}

/// Descending order of `values`; equal values keep their input order.
fn descending_order(values: &Vector) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

/// Flip `v` so that its largest-magnitude entry (lowest index on ties) is
/// non-negative. Magnitudes within a relative 1e-10 count as tied so that
/// round-off cannot flip the choice.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() * (1.0 + 1e-10) {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Symmetric eigendecomposition. The input is symmetrized as `(m + m^T)/2`.
pub fn eigen_sym(m: &Matrix) -> Result<EigenDecomposition> {
    let s = prepared(m)?;
    let n = s.nrows();
    let eig = SymmetricEigen::new(s);
    let order = descending_order(&eig.eigenvalues);
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = eig.eigenvectors.column(src).iter().copied().collect();
        fix_sign(&mut col);
        vectors.set_column(dst, &Vector::from_vec(col));
    }
    Ok(EigenDecomposition { values, vectors })
}

/// Eigenvalues only, descending. Cheaper than [`eigen_sym`].
pub fn eigenvalues_sym(m: &Matrix) -> Result<Vector> {
    let s = prepared(m)?;
    let mut vals: Vec<f64> = s.symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(Vector::from_vec(vals))
}

/// An ordered series of equally shaped tensors `X_1, .., X_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSeries {
    dims: Vec<usize>,
    steps: Vec<Tensor>,
}

impl TensorSeries {
    pub fn new(steps: Vec<Tensor>) -> Result<Self> {
        let first = steps
            .first()
            .ok_or_else(|| Error::ShapeMismatch("a series needs at least one step".into()))?;
        let dims = first.dims().to_vec();
        if let Some(bad) = steps.iter().position(|s| s.dims() != dims.as_slice()) {
            return Err(Error::ShapeMismatch(format!(
                "step {bad} has dims {:?}, expected {dims:?}",
                steps[bad].dims()
            )));
        }
        Ok(Self { dims, steps })
    }

    /// Build from time-major flat data: `T` consecutive tensors in storage order.
    pub fn from_flat(dims: Vec<usize>, t: usize, data: &[f64]) -> Result<Self> {
        let len = check_dims(&dims)?;
        if t == 0 || data.len() != t * len {
            return Err(Error::ShapeMismatch(format!(
                "{t} steps of dims {dims:?} need {} values, got {}",
                t * len,
                data.len()
            )));
        }
        let steps = data
            .chunks_exact(len)
            .map(|c| Tensor { dims: dims.clone(), data: c.to_vec() })
            .collect();
        Ok(Self { dims, steps })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[Tensor] {
        &self.steps
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.steps.iter().flat_map(|s| s.data.iter().copied()).collect()
    }

    pub fn require_steps(&self, required: usize) -> Result<()> {
        if self.len() < required {
            return Err(Error::InsufficientSteps { required, actual: self.len() });
        }
        Ok(())
    }

    pub fn mean(&self) -> Tensor {
        let mut data = vec![0.0; self.steps[0].len()];
        for s in &self.steps {
            for (acc, x) in data.iter_mut().zip(&s.data) {
                *acc += x;
            }
        }
        let t = self.len() as f64;
        data.iter_mut().for_each(|x| *x /= t);
        Tensor { dims: self.dims.clone(), data }
    }

    /// Series with the sample mean tensor subtracted from every step.
    pub fn centered(&self) -> TensorSeries {
        let mean = self.mean();
        let steps = self
            .steps
            .iter()
            .map(|s| Tensor {
                dims: self.dims.clone(),
                data: s.data.iter().zip(&mean.data).map(|(x, m)| x - m).collect(),
            })
            .collect();
        TensorSeries { dims: self.dims.clone(), steps }
    }

    pub fn scaled(&self, c: f64) -> TensorSeries {
        TensorSeries {
            dims: self.dims.clone(),
            steps: self.steps.iter().map(|s| s.scaled(c)).collect(),
        }
    }

    /// Add the same tensor to every step.
    pub fn shifted(&self, shift: &Tensor) -> Result<TensorSeries> {
        if shift.dims() != self.dims.as_slice() {
            return Err(Error::ShapeMismatch("shift tensor dims differ from the series".into()));
        }
        let steps = self
            .steps
            .iter()
            .map(|s| Tensor {
                dims: self.dims.clone(),
                data: s.data.iter().zip(&shift.data).map(|(x, m)| x + m).collect(),
            })
            .collect();
        Ok(TensorSeries { dims: self.dims.clone(), steps })
    }

    /// `d_k × T` matrix whose column `t` is `Σ_j w_j · (fibre j of X_t)` for
    /// the weighted unfolding columns in `fibres`.
    pub(crate) fn weighted_fibre_sum(&self, mode: usize, fibres: &[(usize, f64)]) -> Result<Matrix> {
        let lay = ModeLayout::new(&self.dims, mode)?;
        let offsets: Vec<(usize, f64)> =
            fibres.iter().map(|&(col, w)| (lay.fibre_offset(col), w)).collect();
        let mut out = Matrix::zeros(lay.dim, self.len());
        for (t, step) in self.steps.iter().enumerate() {
            let mut col = out.column_mut(t);
            let data = &step.data;
            if lay.inner == 1 {
                for &(off, w) in &offsets {
                    let fibre = &data[off..off + lay.dim];
                    for (acc, x) in col.iter_mut().zip(fibre) {
                        *acc += w * x;
                    }
                }
            } else {
                for &(off, w) in &offsets {
                    for (i, acc) in col.iter_mut().enumerate() {
                        *acc += w * data[off + i * lay.inner];
                    }
                }
            }
        }
        Ok(out)
    }

    /// `d_k × T` matrix of `mat_k(X_t) q` for every step.
    pub(crate) fn contract_all_but(&self, mode: usize, q: &Vector) -> Result<Matrix> {
        let lay = ModeLayout::new(&self.dims, mode)?;
        if q.len() != lay.fibres() {
            return Err(Error::ShapeMismatch(format!(
                "projection vector has length {}, mode {mode} has {} fibres",
                q.len(),
                lay.fibres()
            )));
        }
        let fibres: Vec<(usize, f64)> =
            q.iter().enumerate().filter(|(_, w)| **w != 0.0).map(|(j, w)| (j, *w)).collect();
        self.weighted_fibre_sum(mode, &fibres)
    }

    /// Mode-k unfoldings of all steps stacked side by side: `d_k × (T·d_{-k})`.
    pub(crate) fn stacked_unfolding(&self, mode: usize) -> Result<Matrix> {
        let lay = ModeLayout::new(&self.dims, mode)?;
        let mut m = Matrix::zeros(lay.dim, lay.fibres() * self.len());
        for (t, step) in self.steps.iter().enumerate() {
            let u = unfold(step, mode)?;
            m.columns_mut(t * lay.fibres(), lay.fibres()).copy_from(&u);
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> Tensor {
        Tensor::new(vec![2, 2, 2], (1..=8).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn unfold_matrix_cases() {
        let m = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let as_matrix = Matrix::from_column_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(unfold(&m, 0).unwrap(), as_matrix);
        assert_eq!(unfold(&m, 1).unwrap(), as_matrix.transpose());
    }

    #[test]
    fn unfold_cube_mode_one() {
        let u = unfold(&cube(), 0).unwrap();
        let expected = Matrix::from_row_slice(2, 4, &[1.0, 3.0, 5.0, 7.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(u, expected);
    }

    #[test]
    fn unfold_matches_index_formula() {
        let t = Tensor::from_fn(vec![2, 3, 4], |i| (i[0] + 10 * i[1] + 100 * i[2]) as f64).unwrap();
        let dims = [2usize, 3, 4];
        for k in 0..3 {
            let u = unfold(&t, k).unwrap();
            for i0 in 0..2 {
                for i1 in 0..3 {
                    for i2 in 0..4 {
                        let idx = [i0, i1, i2];
                        let mut col = 0;
                        let mut stride = 1;
                        for l in 0..3 {
                            if l != k {
                                col += idx[l] * stride;
                                stride *= dims[l];
                            }
                        }
                        assert_eq!(u[(idx[k], col)], t.get(&idx));
                    }
                }
            }
        }
    }

    #[test]
    fn fold_inverts_unfold() {
        let m = Matrix::from_row_slice(2, 4, &[1.0, 3.0, 5.0, 7.0, 2.0, 4.0, 6.0, 8.0]);
        assert_eq!(fold(&m, &[2, 2, 2], 0).unwrap(), cube());
        let t = Tensor::from_fn(vec![3, 2, 2, 2], |i| i.iter().sum::<usize>() as f64 * 0.5).unwrap();
        for k in 0..4 {
            assert_eq!(fold(&unfold(&t, k).unwrap(), t.dims(), k).unwrap(), t);
        }
    }

    #[test]
    fn fold_rejects_wrong_shape() {
        let m = Matrix::zeros(2, 3);
        assert!(matches!(fold(&m, &[2, 2, 2], 0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn invalid_mode_is_rejected() {
        assert!(matches!(unfold(&cube(), 3), Err(Error::InvalidMode { mode: 3, order: 3 })));
    }

    #[test]
    fn mode_product_identity_and_matrix_case() {
        let t = cube();
        assert_eq!(kmode_product(&t, &Matrix::identity(2, 2), 1).unwrap(), t);

        let f = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let a = Matrix::from_row_slice(3, 2, &[1.0, -1.0, 0.5, 2.0, 0.0, 3.0]);
        let prod = kmode_product(&f, &a, 0).unwrap();
        let fm = unfold(&f, 0).unwrap();
        assert_eq!(unfold(&prod, 0).unwrap(), &a * &fm);
        let prod2 = kmode_product(&f, &a, 1).unwrap();
        assert_eq!(unfold(&prod2, 0).unwrap(), &fm * a.transpose());
    }

    #[test]
    fn mode_product_dimension_mismatch() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(kmode_product(&cube(), &a, 0), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn mode_product_direct_summation() {
        // direct Σ_{i_k} f(..i_k..) a(j, i_k) oracle on a 2×3×2 tensor, mode 2 (index 1)
        let f = Tensor::from_fn(vec![2, 3, 2], |i| (1 + i[0] * 7 + i[1] * 3 + i[2] * 11) as f64 * 0.1)
            .unwrap();
        let a = Matrix::from_fn(4, 3, |r, c| (r as f64 + 1.0) * 0.3 - c as f64 * 0.7);
        let got = kmode_product(&f, &a, 1).unwrap();
        assert_eq!(got.dims(), &[2, 4, 2]);
        for i0 in 0..2 {
            for j in 0..4 {
                for i2 in 0..2 {
                    let want: f64 = (0..3).map(|ik| f.get(&[i0, ik, i2]) * a[(j, ik)]).sum();
                    assert!((got.get(&[i0, j, i2]) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn kron_chain_cases() {
        let m1 = Matrix::from_row_slice(1, 1, &[3.0]);
        let m2 = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let m3 = Matrix::from_row_slice(1, 1, &[2.0]);
        assert_eq!(kron_chain_minus_k(&[m1.clone(), m2.clone()], 0).unwrap(), m2);
        assert_eq!(
            kron_chain_minus_k(&[m1.clone(), m2.clone(), m3], 1).unwrap(),
            Matrix::from_row_slice(1, 1, &[6.0])
        );
        assert_eq!(kron_chain_minus_k(&[m1], 0).unwrap(), Matrix::identity(1, 1));
    }

    #[test]
    fn kron_chain_elementwise_oracle() {
        let v: Vec<Vector> = vec![
            Vector::from_vec(vec![1.0, 2.0]),
            Vector::from_vec(vec![-1.0, 0.5, 3.0]),
            Vector::from_vec(vec![2.0, 4.0]),
        ];
        let mats: Vec<Matrix> = v.iter().map(|x| Matrix::from_column_slice(x.len(), 1, x.as_slice())).collect();
        for k in 0..3 {
            let chain = kron_chain_minus_k(&mats, k).unwrap();
            let vchain = kron_vectors_minus_k(&v, k).unwrap();
            let others: Vec<usize> = (0..3).filter(|&l| l != k).collect();
            // (v_hi ⊗ v_lo)[i_hi * len_lo + i_lo] = v_hi[i_hi] v_lo[i_lo]
            let (lo, hi) = (others[0], others[1]);
            for ih in 0..v[hi].len() {
                for il in 0..v[lo].len() {
                    let want = v[hi][ih] * v[lo][il];
                    let pos = ih * v[lo].len() + il;
                    assert_eq!(chain[(pos, 0)], want);
                    assert_eq!(vchain[pos], want);
                }
            }
        }
    }

    #[test]
    fn covariance_cases() {
        let constant = Matrix::from_column_slice(2, 3, &[1.0, 2.0, 1.0, 2.0, 1.0, 2.0]);
        assert_eq!(centered_covariance(&constant).unwrap(), Matrix::zeros(2, 2));

        let two = Matrix::from_column_slice(2, 2, &[1.0, 0.0, 3.0, 0.0]);
        let cov = centered_covariance(&two).unwrap();
        assert_eq!(cov, Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));

        let scaled = centered_covariance(&(two * 3.0)).unwrap();
        assert!((scaled - cov * 9.0).norm() < 1e-12);

        let one = Matrix::zeros(2, 1);
        assert!(matches!(centered_covariance(&one), Err(Error::InsufficientSteps { .. })));
    }

    #[test]
    fn eigen_diagonal_and_identity() {
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = eigen_sym(&d).unwrap();
        assert_eq!(e.values.as_slice(), &[3.0, 2.0, 1.0]);
        let expected_cols = [0, 2, 1];
        for (j, &c) in expected_cols.iter().enumerate() {
            for i in 0..3 {
                let want = if i == c { 1.0 } else { 0.0 };
                assert!((e.vectors[(i, j)] - want).abs() < 1e-12);
            }
        }
        let id = eigen_sym(&Matrix::identity(4, 4)).unwrap();
        assert!(id.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn eigen_two_by_two() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = eigen_sym(&m).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-12 && (e.values[1] - 1.0).abs() < 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.vectors[(0, 0)] - s).abs() < 1e-12 && (e.vectors[(1, 0)] - s).abs() < 1e-12);
        // (1,-1)/√2: first entry wins the magnitude tie, so it is non-negative
        assert!((e.vectors[(0, 1)] - s).abs() < 1e-12 && (e.vectors[(1, 1)] + s).abs() < 1e-12);
    }

    #[test]
    fn eigen_rejects_non_finite() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, f64::NAN, f64::NAN, 1.0]);
        assert!(matches!(eigen_sym(&m), Err(Error::NonFinite)));
    }

    #[test]
    fn fibre_sums_match_unfolding() {
        let steps = vec![
            Tensor::new(vec![2, 2], vec![1.0, 3.0, 2.0, 4.0]).unwrap(),
            Tensor::new(vec![2, 2], vec![0.0, 1.0, 5.0, 2.0]).unwrap(),
        ];
        let s = TensorSeries::new(steps).unwrap();
        let all = Vector::from_element(2, 1.0);
        let y = s.contract_all_but(1, &all).unwrap();
        // rows of [[1,2],[3,4]] summed along mode 2: (1+3, 2+4)
        assert_eq!(y.column(0).as_slice(), &[4.0, 6.0]);
        let stacked = s.stacked_unfolding(1).unwrap();
        assert_eq!(stacked.ncols(), 4);
        assert_eq!(stacked.columns(0, 2).into_owned(), unfold(&s.steps()[0], 1).unwrap());
    }
}
