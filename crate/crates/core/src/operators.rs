//! Fixed-size single-site (2×2) and two-site (4×4) operators.
//!
//! Basis convention: index 0 is spin up (σ^z = +1), index 1 is spin down.
//! A two-site operator acting on sites `(a, a + 1)` uses the combined index
//! `2 * s_a + s_{a+1}`. Spin operators are `S^α = σ^α / 2`.

use std::ops::Mul;

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Spin component.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'x' | 'X' => Some(Self::X),
            'y' | 'Y' => Some(Self::Y),
            'z' | 'Z' => Some(Self::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Self::X => 'x',
            Self::Y => 'y',
            Self::Z => 'z',
        }
    }
}

/// A 2×2 complex matrix in row-major order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Op1(pub [C64; 4]);

impl Op1 {
    pub const fn new(m00: C64, m01: C64, m10: C64, m11: C64) -> Self {
        Self([m00, m01, m10, m11])
    }

    pub const fn identity() -> Self {
        Self([ONE, ZERO, ZERO, ONE])
    }

    pub fn pauli(axis: Axis) -> Self {
        match axis {
            Axis::X => Self([ZERO, ONE, ONE, ZERO]),
            Axis::Y => Self([ZERO, -I, I, ZERO]),
            Axis::Z => Self([ONE, ZERO, ZERO, -ONE]),
        }
    }

    /// `S^α = σ^α / 2`.
    pub fn spin(axis: Axis) -> Self {
        Self::pauli(axis).scaled(C64::new(0.5, 0.0))
    }

    /// The rank-one projector `|v⟩⟨v|`.
    pub fn projector(v: [C64; 2]) -> Self {
        Self([v[0] * v[0].conj(), v[0] * v[1].conj(), v[1] * v[0].conj(), v[1] * v[1].conj()])
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[2 * row + col]
    }

    pub fn scaled(self, c: C64) -> Self {
        Self(self.0.map(|z| z * c))
    }

    pub fn adjoint(&self) -> Self {
        Self([self.0[0].conj(), self.0[2].conj(), self.0[1].conj(), self.0[3].conj()])
    }

    pub fn trace(&self) -> C64 {
        self.0[0] + self.0[3]
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [self.0[0] * v[0] + self.0[1] * v[1], self.0[2] * v[0] + self.0[3] * v[1]]
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        (self.adjoint() * *self).max_abs_diff(&Self::identity()) <= tol
    }

    /// `exp(-i θ σ^α)` in closed form.
    pub fn pauli_rotation(axis: Axis, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        let p = Self::pauli(axis);
        Self(std::array::from_fn(|k| {
            let id = if k == 0 || k == 3 { c } else { 0.0 };
            C64::new(id, 0.0) - I * s * p.0[k]
        }))
    }
}

impl Mul for Op1 {
    type Output = Op1;

    fn mul(self, rhs: Op1) -> Op1 {
        let a = &self.0;
        let b = &rhs.0;
        Op1([
            a[0] * b[0] + a[1] * b[2],
            a[0] * b[1] + a[1] * b[3],
            a[2] * b[0] + a[3] * b[2],
            a[2] * b[1] + a[3] * b[3],
        ])
    }
}

/// Orthonormal measurement basis: `vectors[k]` is the outcome-`k` state.
pub type Basis = [[C64; 2]; 2];

/// Eigenbasis of `S^α`, ordered `+1/2` then `-1/2`.
pub fn eigenbasis(axis: Axis) -> Basis {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match axis {
        Axis::Z => [[ONE, ZERO], [ZERO, ONE]],
        Axis::X => [[C64::new(h, 0.0), C64::new(h, 0.0)], [C64::new(h, 0.0), C64::new(-h, 0.0)]],
        Axis::Y => [[C64::new(h, 0.0), C64::new(0.0, h)], [C64::new(h, 0.0), C64::new(0.0, -h)]],
    }
}

/// Eigenvalue of `S^α` attached to outcome `k` of [`eigenbasis`].
pub fn eigenvalue(outcome: usize) -> f64 {
    if outcome == 0 {
        0.5
    } else {
        -0.5
    }
}

/// A 4×4 complex matrix in row-major order acting on two adjacent sites.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gate2(pub [C64; 16]);

impl Gate2 {
    pub fn identity() -> Self {
        Self(std::array::from_fn(|k| if k % 5 == 0 { ONE } else { ZERO }))
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[4 * row + col]
    }

    /// `a ⊗ b` with `a` on the left site.
    pub fn kron(a: &Op1, b: &Op1) -> Self {
        let mut m = [ZERO; 16];
        for (r, row) in m.chunks_mut(4).enumerate() {
            for (c, z) in row.iter_mut().enumerate() {
                *z = a.get(r / 2, c / 2) * b.get(r % 2, c % 2);
            }
        }
        Self(m)
    }

    pub fn scaled(self, c: C64) -> Self {
        Self(self.0.map(|z| z * c))
    }

    pub fn adjoint(&self) -> Self {
        Self(std::array::from_fn(|k| self.0[4 * (k % 4) + k / 4].conj()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise deviation of `G†G` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Self::identity())
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Diagonal gate from its four diagonal entries.
    pub fn diagonal(d: [C64; 4]) -> Self {
        let mut m = [ZERO; 16];
        for (k, z) in d.into_iter().enumerate() {
            m[5 * k] = z;
        }
        Self(m)
    }

    /// `exp(-i t H)` for a Hermitian `H`, via its eigendecomposition.
    pub fn exp_hermitian(h: &Gate2, t: f64) -> Result<Self> {
        if !h.is_hermitian(1e-12) {
            return Err(Error::Contract("exp_hermitian of a non-Hermitian matrix".into()));
        }
        let m = Mat::<C64>::from_fn(4, 4, |i, j| h.get(i, j));
        let eig = m
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e:?}")))?;
        let u = eig.U();
        let s = eig.S().column_vector();
        let phases: Vec<C64> = (0..4).map(|k| (-I * t * s[k].re).exp()).collect();
        Ok(Self(std::array::from_fn(|k| {
            let (i, j) = (k / 4, k % 4);
            (0..4).map(|n| u[(i, n)] * phases[n] * u[(j, n)].conj()).sum()
        })))
    }

    /// `S^z S^z + (S^+ S^- + S^- S^+)/2 = S^x S^x + S^y S^y + S^z S^z`.
    pub fn heisenberg_bond() -> Self {
        [Axis::X, Axis::Y, Axis::Z]
            .iter()
            .map(|&a| Self::kron(&Op1::spin(a), &Op1::spin(a)))
            .fold(Self([ZERO; 16]), |acc, g| Self(std::array::from_fn(|k| acc.0[k] + g.0[k])))
    }
}

impl Mul for Gate2 {
    type Output = Gate2;

    fn mul(self, rhs: Gate2) -> Gate2 {
        Gate2(std::array::from_fn(|k| {
            let (i, j) = (k / 4, k % 4);
            (0..4).map(|n| self.0[4 * i + n] * rhs.0[4 * n + j]).sum()
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spin_algebra() {
        // [S^x, S^y] = i S^z
        let sx = Op1::spin(Axis::X);
        let sy = Op1::spin(Axis::Y);
        let comm = Op1(std::array::from_fn(|k| (sx * sy).0[k] - (sy * sx).0[k]));
        assert!(comm.max_abs_diff(&Op1::spin(Axis::Z).scaled(I)) < 1e-15);
        for a in [Axis::X, Axis::Y, Axis::Z] {
            assert!(Op1::spin(a).is_hermitian(0.0));
            let sq = Op1::spin(a) * Op1::spin(a);
            assert!(sq.max_abs_diff(&Op1::identity().scaled(C64::new(0.25, 0.0))) < 1e-15);
        }
    }

    #[test]
    fn eigenbases_are_eigenvectors() {
        for a in [Axis::X, Axis::Y, Axis::Z] {
            let s = Op1::spin(a);
            for (k, v) in eigenbasis(a).iter().enumerate() {
                let sv = s.apply(*v);
                let lam = eigenvalue(k);
                assert!((sv[0] - v[0] * lam).norm() < 1e-15 && (sv[1] - v[1] * lam).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn kron_orders_left_site_first() {
        let g = Gate2::kron(&Op1::pauli(Axis::X), &Op1::identity());
        // |↑↓⟩ = index 1 maps to |↓↓⟩ = index 3.
        assert_eq!(g.get(3, 1), ONE);
        assert_eq!(g.get(1, 1), ZERO);
    }

    #[test]
    fn pauli_rotation_is_unitary() {
        for a in [Axis::X, Axis::Y, Axis::Z] {
            assert!(Op1::pauli_rotation(a, 0.37).is_unitary(1e-15));
        }
        let k = Op1::pauli_rotation(Axis::X, std::f64::consts::FRAC_PI_4);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((k.get(0, 1) - C64::new(0.0, -h)).norm() < 1e-15);
    }

    #[test]
    fn heisenberg_bond_spectrum() {
        // Triplet at +1/4, singlet at -3/4, so exp(-i t h) has a closed form:
        // e^{i t/4} (cos(t/2) I - i sin(t/2) SWAP).
        let t = 0.3;
        let g = Gate2::exp_hermitian(&Gate2::heisenberg_bond(), t).unwrap();
        let swap = Gate2::diagonal([ONE, ZERO, ZERO, ONE]);
        let swap = Gate2(std::array::from_fn(|k| if k == 6 || k == 9 { ONE } else { swap.0[k] }));
        let expected = Gate2(std::array::from_fn(|k| {
            let id = if k % 5 == 0 { (t / 2.0).cos() } else { 0.0 };
            (C64::new(id, 0.0) - I * (t / 2.0).sin() * swap.0[k]) * (I * t / 4.0).exp()
        }));
        assert!(g.max_abs_diff(&expected) < 1e-14);
        assert!(g.is_unitary(1e-13));
    }

    #[test]
    fn exp_hermitian_rejects_non_hermitian() {
        let mut h = Gate2::identity();
        h.0[1] = ONE;
        assert!(Gate2::exp_hermitian(&h, 1.0).is_err());
    }
}
