//! Dense complex tensors and the handful of kernels the MPS layer needs:
//! axis permutation, pairwise contraction, truncated SVD and thin QR.
//!
//! Storage is row-major: for a tensor of shape `[d0, d1, ..., dk]` the element
//! at multi-index `(i0, i1, ..., ik)` lives at offset
//! `((i0 * d1 + i1) * d2 + i2) ... * dk + ik`. Contraction results list the
//! free axes of the left operand first, followed by the free axes of the right
//! operand, each in their original order.

use faer::{linalg::matmul::matmul, Accum, Mat, MatMut, MatRef, Par};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// A dense tensor of complex numbers in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

impl DenseTensor {
    /// Wraps `data` with the given shape. Every dimension must be positive,
    /// the element count must match and every value must be finite.
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Shape(format!("zero dimension in shape {shape:?}")));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} holds {len} values but {} were given",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Shape("non-finite tensor entry".into()));
        }
        Ok(Self { shape, data })
    }

    // Internal constructor for results of operations that cannot break the
    // invariants.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<C64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self { shape, data }
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self { shape, data: vec![C64::new(0.0, 0.0); len] }
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(vec![n, n]);
        for i in 0..n {
            t.data[i * n + i] = C64::new(1.0, 0.0);
        }
        t
    }

    /// Builds a tensor by evaluating `f` at every multi-index, in storage
    /// order.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let len: usize = shape.iter().product();
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for ax in (0..shape.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        Self { shape, data }
    }

    /// Real diagonal matrix.
    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut t = Self::zeros(vec![n, n]);
        for (i, &v) in values.iter().enumerate() {
            t.data[i * n + i] = C64::new(v, 0.0);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<C64> {
        self.data
    }

    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| {
                debug_assert!(i < d);
                acc * d + i
            })
    }

    pub fn get(&self, idx: &[usize]) -> C64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: C64) {
        let off = self.offset(idx);
        self.data[off] = value;
    }

    /// Reinterprets the data under a new shape with the same element count.
    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() || shape.contains(&0) {
            return Err(Error::Shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        Ok(Self { shape, data: self.data })
    }

    pub(crate) fn reshaped(mut self, shape: Vec<usize>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), self.data.len());
        self.shape = shape;
        self
    }

    /// Reorders axes so that output axis `k` is input axis `axes[k]`.
    pub fn permute(&self, axes: &[usize]) -> Result<Self> {
        let rank = self.rank();
        let mut seen = vec![false; rank];
        if axes.len() != rank
            || axes.iter().any(|&a| a >= rank || std::mem::replace(&mut seen[a], true))
        {
            return Err(Error::Shape(format!(
                "{axes:?} is not a permutation of {rank} axes"
            )));
        }
        if axes.iter().enumerate().all(|(k, &a)| k == a) {
            return Ok(self.clone());
        }
        let mut in_strides = vec![1usize; rank];
        for ax in (0..rank.saturating_sub(1)).rev() {
            in_strides[ax] = in_strides[ax + 1] * self.shape[ax + 1];
        }
        let out_shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        let mut idx = vec![0usize; rank];
        let mut off = 0usize;
        for _ in 0..self.data.len() {
            data.push(self.data[off]);
            for ax in (0..rank).rev() {
                idx[ax] += 1;
                off += strides[ax];
                if idx[ax] < out_shape[ax] {
                    break;
                }
                off -= strides[ax] * out_shape[ax];
                idx[ax] = 0;
            }
        }
        Ok(Self { shape: out_shape, data })
    }

    pub fn conj(&self) -> Self {
        Self { shape: self.shape.clone(), data: self.data.iter().map(|z| z.conj()).collect() }
    }

    pub fn scale(&mut self, factor: C64) {
        self.data.iter_mut().for_each(|z| *z *= factor);
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest absolute entrywise difference; shapes must agree.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape, other.shape, "max_abs_diff on mismatched shapes");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    fn as_matrix(&self) -> MatRef<'_, C64> {
        debug_assert_eq!(self.rank(), 2);
        MatRef::from_row_major_slice(&self.data, self.shape[0], self.shape[1])
    }

    fn from_mat(m: MatRef<'_, C64>) -> Self {
        let (r, c) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self { shape: vec![r, c], data }
    }

    /// Conjugate transpose of a matrix.
    pub fn adjoint(&self) -> Result<Self> {
        if self.rank() != 2 {
            return Err(Error::Shape("adjoint of a non-matrix".into()));
        }
        Ok(Self::from_mat(self.as_matrix().adjoint().to_owned().as_ref()))
    }
}

/// Which operand of a matrix product is conjugate-transposed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Adj {
    None,
    Left,
}

/// Matrix product of two rank-2 tensors, optionally using the adjoint of the
/// left factor.
pub(crate) fn matmul_2d(a: &DenseTensor, b: &DenseTensor, adj: Adj) -> DenseTensor {
    let a_view = a.as_matrix();
    let b_view = b.as_matrix();
    let (m, k) = match adj {
        Adj::None => (a.shape[0], a.shape[1]),
        Adj::Left => (a.shape[1], a.shape[0]),
    };
    assert_eq!(k, b.shape[0], "inner dimensions differ in matrix product");
    let n = b.shape[1];
    let mut out = vec![C64::new(0.0, 0.0); m * n];
    {
        let dst = MatMut::from_row_major_slice_mut(&mut out, m, n);
        match adj {
            Adj::None => matmul(dst, Accum::Replace, a_view, b_view, C64::new(1.0, 0.0), Par::Seq),
            Adj::Left => matmul(
                dst,
                Accum::Replace,
                a_view.adjoint(),
                b_view,
                C64::new(1.0, 0.0),
                Par::Seq,
            ),
        }
    }
    DenseTensor { shape: vec![m, n], data: out }
}

/// Sums over each `(axis_of_a, axis_of_b)` pair. Remaining axes of `a`
/// precede remaining axes of `b` in the result.
pub fn contract(a: &DenseTensor, b: &DenseTensor, paired_axes: &[(usize, usize)]) -> Result<DenseTensor> {
    let mut used_a = vec![false; a.rank()];
    let mut used_b = vec![false; b.rank()];
    for &(ia, ib) in paired_axes {
        if ia >= a.rank() || ib >= b.rank() {
            return Err(Error::Shape(format!("axis pair ({ia}, {ib}) out of range")));
        }
        if used_a[ia] || used_b[ib] {
            return Err(Error::Shape(format!("axis pair ({ia}, {ib}) repeats an axis")));
        }
        if a.shape[ia] != b.shape[ib] {
            return Err(Error::Shape(format!(
                "paired axes ({ia}, {ib}) have dimensions {} and {}",
                a.shape[ia], b.shape[ib]
            )));
        }
        used_a[ia] = true;
        used_b[ib] = true;
    }
    let free_a: Vec<usize> = (0..a.rank()).filter(|&i| !used_a[i]).collect();
    let free_b: Vec<usize> = (0..b.rank()).filter(|&i| !used_b[i]).collect();
    let perm_a: Vec<usize> = free_a.iter().copied().chain(paired_axes.iter().map(|p| p.0)).collect();
    let perm_b: Vec<usize> = paired_axes.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();

    let m: usize = free_a.iter().map(|&i| a.shape[i]).product();
    let k: usize = paired_axes.iter().map(|p| a.shape[p.0]).product();
    let n: usize = free_b.iter().map(|&i| b.shape[i]).product();

    let am = a.permute(&perm_a)?.reshaped(vec![m, k]);
    let bm = b.permute(&perm_b)?.reshaped(vec![k, n]);
    let out = matmul_2d(&am, &bm, Adj::None);

    let mut shape: Vec<usize> = free_a.iter().map(|&i| a.shape[i]).collect();
    shape.extend(free_b.iter().map(|&i| b.shape[i]));
    if shape.is_empty() {
        shape.push(1);
    }
    Ok(out.reshaped(shape))
}

/// Limits applied when discarding singular values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPolicy {
    /// Largest tolerated relative discarded squared weight.
    pub epsilon: f64,
    /// Hard cap on the kept rank; `None` means unbounded.
    pub chi_max: Option<usize>,
}

impl TruncationPolicy {
    pub fn new(epsilon: f64, chi_max: Option<usize>) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::Contract(format!("truncation epsilon {epsilon} outside [0, 1)")));
        }
        if chi_max == Some(0) {
            return Err(Error::Contract("chi_max must be positive".into()));
        }
        Ok(Self { epsilon, chi_max })
    }

    /// No truncation beyond exactly vanishing singular values.
    pub const fn exact() -> Self {
        Self { epsilon: 0.0, chi_max: None }
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self::exact()
    }
}

/// Which limit determined the kept rank of a truncated SVD.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationBound {
    /// Nothing was discarded.
    None,
    /// The discarded-weight threshold removed the tail.
    Epsilon,
    /// The rank cap was binding.
    ChiMax,
}

/// Factors of `m ≈ left · diag(s) · right`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// `rows × r` isometry.
    pub left_isometry: DenseTensor,
    /// Non-increasing, length `r`.
    pub singular_values: Vec<f64>,
    /// `r × cols` co-isometry (rows orthonormal).
    pub right_isometry: DenseTensor,
    /// `Σ_{discarded} s² / Σ_all s²`.
    pub discarded_weight: f64,
    pub bound: TruncationBound,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `left · diag(s) · right`.
    pub fn reconstruct(&self) -> DenseTensor {
        let mut us = self.left_isometry.clone();
        let r = self.rank();
        for row in us.data.chunks_mut(r) {
            for (z, &s) in row.iter_mut().zip(&self.singular_values) {
                *z *= s;
            }
        }
        matmul_2d(&us, &self.right_isometry, Adj::None)
    }
}

/// Kept rank under `policy` for a non-increasing spectrum.
pub(crate) fn kept_rank(singular_values: &[f64], policy: &TruncationPolicy) -> (usize, TruncationBound) {
    let full = singular_values.len();
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if full == 0 {
        return (0, TruncationBound::None);
    }
    let mut rank = if total > 0.0 {
        // tail[r] = Σ_{i ≥ r} s_i², accumulated from the small end.
        let mut tail = 0.0;
        let mut r = full;
        while r > 1 {
            let next = tail + singular_values[r - 1] * singular_values[r - 1];
            if next / total > policy.epsilon {
                break;
            }
            tail = next;
            r -= 1;
        }
        r
    } else {
        1
    };
    let mut bound = if rank < full { TruncationBound::Epsilon } else { TruncationBound::None };
    if let Some(cap) = policy.chi_max {
        if rank > cap {
            rank = cap;
            bound = TruncationBound::ChiMax;
        }
    }
    (rank, bound)
}

/// Thin SVD of a rank-2 tensor followed by truncation under `policy`.
///
/// The kept factors are not renormalized; `discarded_weight` reports the
/// relative squared weight that was removed.
pub fn svd_truncate(m: &DenseTensor, policy: &TruncationPolicy) -> Result<SvdResult> {
    if m.rank() != 2 {
        return Err(Error::Shape(format!("svd of a rank-{} tensor", m.rank())));
    }
    if m.is_empty() {
        return Err(Error::Shape("svd of an empty matrix".into()));
    }
    let (rows, cols) = (m.shape[0], m.shape[1]);
    let svd = m
        .as_matrix()
        .thin_svd()
        .map_err(|e| Error::Linalg(format!("svd of {rows}x{cols} matrix: {e:?}")))?;
    let s_all: Vec<f64> = svd.S().column_vector().iter().map(|z| z.re).collect();
    let total: f64 = s_all.iter().map(|s| s * s).sum();
    let (rank, bound) = kept_rank(&s_all, policy);
    let discarded: f64 = s_all[rank..].iter().map(|s| s * s).sum();
    let discarded_weight = if total > 0.0 { discarded / total } else { 0.0 };

    let u = svd.U();
    let v = svd.V();
    let mut left = Vec::with_capacity(rows * rank);
    for i in 0..rows {
        for j in 0..rank {
            left.push(u[(i, j)]);
        }
    }
    let mut right = Vec::with_capacity(rank * cols);
    for i in 0..rank {
        for j in 0..cols {
            right.push(v[(j, i)].conj());
        }
    }
    Ok(SvdResult {
        left_isometry: DenseTensor::from_parts(vec![rows, rank], left),
        singular_values: s_all[..rank].to_vec(),
        right_isometry: DenseTensor::from_parts(vec![rank, cols], right),
        discarded_weight,
        bound,
    })
}

/// Thin QR factorization `m = q · r` with `q` of shape `rows × k`, `r` of
/// shape `k × cols`, `k = min(rows, cols)`.
pub fn qr(m: &DenseTensor) -> Result<(DenseTensor, DenseTensor)> {
    if m.rank() != 2 {
        return Err(Error::Shape(format!("qr of a rank-{} tensor", m.rank())));
    }
    let qr = m.as_matrix().qr();
    let q: Mat<C64> = qr.compute_thin_Q();
    let r = qr.thin_R();
    Ok((DenseTensor::from_mat(q.as_ref()), DenseTensor::from_mat(r)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_tensor(shape: Vec<usize>, rng: &mut ChaCha8Rng) -> DenseTensor {
        DenseTensor::from_fn(shape, |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    // Independent reference: explicit nested loops over every index.
    fn naive_contract_3x2(a: &DenseTensor, b: &DenseTensor) -> DenseTensor {
        let (d0, d1, d2) = (a.shape()[0], a.shape()[1], a.shape()[2]);
        let d3 = b.shape()[1];
        DenseTensor::from_fn(vec![d0, d1, d3], |idx| {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..d2 {
                acc += a.get(&[idx[0], idx[1], k]) * b.get(&[k, idx[2]]);
            }
            acc
        })
    }

    #[test]
    fn contract_identity_with_vector() {
        let v = DenseTensor::new(vec![2], vec![C64::new(0.3, -1.0), c(2.0)]).unwrap();
        let out = contract(&DenseTensor::identity(2), &v, &[(1, 0)]).unwrap();
        assert_eq!(out.shape(), &[2]);
        assert!(out.max_abs_diff(&v) < 1e-15);
    }

    #[test]
    fn contract_diagonals() {
        let out = contract(&DenseTensor::diag(&[2.0, 3.0]), &DenseTensor::diag(&[5.0, 7.0]), &[(1, 0)]).unwrap();
        assert!(out.max_abs_diff(&DenseTensor::diag(&[10.0, 21.0])) < 1e-15);
    }

    #[test]
    fn contract_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_tensor(vec![2, 3, 4], &mut rng);
        let b = random_tensor(vec![4, 5], &mut rng);
        let out = contract(&a, &b, &[(2, 0)]).unwrap();
        assert_eq!(out.shape(), &[2, 3, 5]);
        assert!(out.max_abs_diff(&naive_contract_3x2(&a, &b)) < 1e-13);
    }

    #[test]
    fn contract_rejects_mismatched_axes() {
        let a = DenseTensor::zeros(vec![2, 3]);
        let b = DenseTensor::zeros(vec![2, 3]);
        assert!(matches!(contract(&a, &b, &[(1, 0)]), Err(Error::Shape(_))));
    }

    #[test]
    fn new_rejects_bad_data() {
        assert!(DenseTensor::new(vec![2, 2], vec![c(1.0); 3]).is_err());
        assert!(DenseTensor::new(vec![1], vec![C64::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn permute_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_tensor(vec![2, 3, 4], &mut rng);
        let p = a.permute(&[2, 0, 1]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        assert_eq!(p.get(&[3, 1, 2]), a.get(&[1, 2, 3]));
        assert_eq!(p.permute(&[1, 2, 0]).unwrap(), a);
    }

    #[test]
    fn svd_identity() {
        let r = svd_truncate(&DenseTensor::identity(2), &TruncationPolicy::exact()).unwrap();
        assert_eq!(r.singular_values.len(), 2);
        assert!((r.singular_values[0] - 1.0).abs() < 1e-14);
        assert!((r.singular_values[1] - 1.0).abs() < 1e-14);
        assert_eq!(r.discarded_weight, 0.0);
    }

    #[test]
    fn svd_keeps_small_value_when_epsilon_requires_it() {
        // Dropping 1e-5 discards relative weight ~1e-10, which is within 1e-8
        // but not within 1e-12.
        let m = DenseTensor::diag(&[1.0, 1e-5]);
        let loose = svd_truncate(&m, &TruncationPolicy::new(1e-8, None).unwrap()).unwrap();
        assert_eq!(loose.rank(), 1);
        assert_eq!(loose.bound, TruncationBound::Epsilon);
        let tight = svd_truncate(&m, &TruncationPolicy::new(1e-12, None).unwrap()).unwrap();
        assert_eq!(tight.rank(), 2);
        assert_eq!(tight.discarded_weight, 0.0);
    }

    #[test]
    fn svd_bell_matrix_capped() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = DenseTensor::diag(&[h, h]);
        let r = svd_truncate(&m, &TruncationPolicy::new(0.0, Some(1)).unwrap()).unwrap();
        assert_eq!(r.rank(), 1);
        assert!((r.discarded_weight - 0.5).abs() < 1e-14);
        assert_eq!(r.bound, TruncationBound::ChiMax);
    }

    #[test]
    fn svd_rejects_non_matrix() {
        assert!(svd_truncate(&DenseTensor::zeros(vec![2, 2, 2]), &TruncationPolicy::exact()).is_err());
    }

    #[test]
    fn qr_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for shape in [[6, 3], [3, 6], [4, 4]] {
            let m = random_tensor(shape.to_vec(), &mut rng);
            let (q, r) = qr(&m).unwrap();
            let back = matmul_2d(&q, &r, Adj::None);
            assert!(back.max_abs_diff(&m) < 1e-13);
            let qq = matmul_2d(&q, &q, Adj::Left);
            assert!(qq.max_abs_diff(&DenseTensor::identity(q.shape()[1])) < 1e-13);
        }
    }

    #[test]
    fn policy_validation() {
        assert!(TruncationPolicy::new(1.0, None).is_err());
        assert!(TruncationPolicy::new(-1e-3, None).is_err());
        assert!(TruncationPolicy::new(0.1, Some(0)).is_err());
    }
}
