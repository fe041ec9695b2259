//! Matrix product states for chains of spin-1/2 sites.
//!
//! Each site tensor has axis signature `[left bond, physical, right bond]` with
//! physical dimension 2 and boundary bond dimensions 1. The state is kept in
//! mixed canonical form around an orthogonality center whenever possible:
//! tensors left of the center are left-isometric, tensors right of it are
//! right-isometric, and the center tensor has unit Frobenius norm. Every scalar
//! that is divided out to maintain that normalization is accumulated in
//! `log_amplitude`, so the represented vector is exactly
//! `exp(log_amplitude) · (contraction of the site tensors)`.
//!
//! ```text
//!   A[0] --- A[1] --- ... --- A[c] --- ... --- A[n-1]
//!    |        |                 |                 |
//!   left-isometric            center      right-isometric
//! ```
//!
//! Singular values are cached per bond. Gates refresh the bond they act on.
//! Projective measurements and non-unitary local operators change the
//! Schmidt spectrum of every bond, so those mark the cache stale and the
//! next entropy query recomputes it with an SVD sweep.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use rand_distr::{Distribution, StandardNormal};

use crate::{
    error::{Error, Result},
    operators::{Basis, Gate2, Op1},
    tensor::{matmul_2d, qr, svd_truncate, Adj, DenseTensor, TruncationBound, TruncationPolicy},
};

/// Probabilities below this are treated as impossible outcomes.
pub const ZERO_PROBABILITY: f64 = 1e-14;

/// Relative singular-value cutoff used when re-factoring after a projection.
const NUMERICAL_ZERO: f64 = 1e-14;

/// Single-site computational basis label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn vector(self) -> [C64; 2] {
        match self {
            Spin::Up => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            Spin::Down => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        }
    }
}

/// Entanglement data across every bond `B_ℓ` (between sites `ℓ` and `ℓ + 1`).
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct EntanglementProfile {
    /// von Neumann entropies in natural-log units, one per bond.
    pub entropies: Vec<f64>,
    pub bond_dims: Vec<usize>,
}

impl EntanglementProfile {
    pub fn peak_entropy(&self) -> f64 {
        self.entropies.iter().copied().fold(0.0, f64::max)
    }

    pub fn peak_chi(&self) -> usize {
        self.bond_dims.iter().copied().max().unwrap_or(1)
    }
}

/// Outcome of a single gate application.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationReport {
    pub discarded_weight: f64,
    /// Bond dimension after truncation.
    pub chi: usize,
    pub bound: TruncationBound,
}

/// One-site reduced density matrix with its spectral decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct OneBodyRdm {
    pub matrix: Op1,
    /// Non-increasing, clamped into `[0, 1]`.
    pub eigenvalues: [f64; 2],
    /// `eigenvectors[k]` belongs to `eigenvalues[k]`.
    pub eigenvectors: Basis,
}

impl OneBodyRdm {
    /// Diagonalizes a 2×2 Hermitian matrix in closed form.
    ///
    /// Eigenvectors are ordered by descending eigenvalue; exact ties fall back
    /// to descending lexicographic order of `(re v0, im v0, re v1, im v1)`.
    /// Each eigenvector is phased so its first non-negligible component is
    /// real and positive.
    pub fn from_matrix(matrix: Op1) -> Self {
        let a = matrix.get(0, 0).re;
        let d = matrix.get(1, 1).re;
        let b = matrix.get(0, 1);
        let mean = 0.5 * (a + d);
        let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        let lam = [mean + half_gap, mean - half_gap];
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let mut vecs: Basis = if b.norm() <= 1e-15 * (1.0 + a.abs() + d.abs()) {
            if a >= d {
                [[one, zero], [zero, one]]
            } else {
                [[zero, one], [one, zero]]
            }
        } else {
            // (H - λ) v = 0  ⇒  v ∝ (b, λ - a)
            lam.map(|l| normalize_phase([b, C64::new(l - a, 0.0)]))
        };
        if lam[0] - lam[1] <= 0.0 {
            let key = |v: &[C64; 2]| [v[0].re, v[0].im, v[1].re, v[1].im];
            if key(&vecs[1]).partial_cmp(&key(&vecs[0])) == Some(std::cmp::Ordering::Greater) {
                vecs.swap(0, 1);
            }
        }
        Self { matrix, eigenvalues: lam.map(|l| l.clamp(0.0, 1.0)), eigenvectors: vecs }
    }

    /// `tr[ρ O]`.
    pub fn expectation(&self, op: &Op1) -> C64 {
        (self.matrix * *op).trace()
    }
}

fn normalize_phase(v: [C64; 2]) -> [C64; 2] {
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let pivot = if v[0].norm() > 1e-12 * n { v[0] } else { v[1] };
    let phase = pivot.conj() / pivot.norm();
    [v[0] * phase / n, v[1] * phase / n]
}

/// Source of measurement decisions. The engine asks for one outcome index per
/// projected site given the two Born probabilities.
pub trait OutcomeChooser {
    fn choose(&mut self, probabilities: [f64; 2]) -> usize;
}

/// Samples outcomes from a random stream: outcome `k` is the one for which
/// `Σ_{i<k} p_i < R ≤ Σ_{i≤k} p_i` with `R` uniform on `(0, 1]`.
pub struct RngChooser<R>(pub R);

impl<R: Rng> OutcomeChooser for RngChooser<R> {
    fn choose(&mut self, probabilities: [f64; 2]) -> usize {
        let total = probabilities[0] + probabilities[1];
        let r = 1.0 - self.0.random::<f64>();
        let k = if r * total <= probabilities[0] { 0 } else { 1 };
        if probabilities[k] < ZERO_PROBABILITY {
            1 - k
        } else {
            k
        }
    }
}

/// A finite matrix product state.
#[derive(Clone, Debug, PartialEq)]
pub struct MpsState {
    tensors: Vec<DenseTensor>,
    center: Option<usize>,
    schmidt: Vec<Vec<f64>>,
    stale: Vec<bool>,
    log_amplitude: C64,
}

impl MpsState {
    /// Product state from one normalized local vector per site.
    pub fn from_local_states(states: &[[C64; 2]]) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Shape("a state needs at least one site".into()));
        }
        let mut tensors = Vec::with_capacity(states.len());
        for v in states {
            let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
            if n == 0.0 || !n.is_finite() {
                return Err(Error::Contract("local state must be a non-zero vector".into()));
            }
            tensors.push(DenseTensor::from_parts(vec![1, 2, 1], vec![v[0] / n, v[1] / n]));
        }
        let bonds = states.len() - 1;
        Ok(Self {
            tensors,
            center: Some(0),
            schmidt: vec![vec![1.0]; bonds],
            stale: vec![false; bonds],
            log_amplitude: C64::new(0.0, 0.0),
        })
    }

    /// Computational-basis product state.
    pub fn product_state(config: &[Spin]) -> Result<Self> {
        let states: Vec<[C64; 2]> = config.iter().map(|s| s.vector()).collect();
        Self::from_local_states(&states)
    }

    /// `|↑↓↑↓…⟩`.
    pub fn neel(n_sites: usize) -> Result<Self> {
        let config: Vec<Spin> =
            (0..n_sites).map(|i| if i % 2 == 0 { Spin::Up } else { Spin::Down }).collect();
        Self::product_state(&config)
    }

    /// Normalized random state with Gaussian site tensors. Bond `ℓ` has
    /// dimension `min(chi, 2^min(ℓ+1, n-ℓ-1))` (0-based bond index).
    pub fn random(n_sites: usize, chi: usize, seed: u64) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::Shape("a state needs at least one site".into()));
        }
        if chi == 0 {
            return Err(Error::Contract("random MPS needs chi >= 1".into()));
        }
        let bond_dim = |b: usize| -> usize {
            let span = (b + 1).min(n_sites - b - 1) as u32;
            if span >= usize::BITS - 1 {
                chi
            } else {
                chi.min(1usize << span)
            }
        };
        let mut dims = vec![1usize];
        dims.extend((0..n_sites - 1).map(bond_dim));
        dims.push(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tensors: Vec<DenseTensor> = (0..n_sites)
            .map(|i| {
                DenseTensor::from_fn(vec![dims[i], 2, dims[i + 1]], |_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    C64::new(re, im)
                })
            })
            .collect();
        let bonds = n_sites - 1;
        let mut state = Self {
            tensors,
            center: None,
            schmidt: (0..bonds).map(|b| vec![0.0; dims[b + 1]]).collect(),
            stale: vec![true; bonds],
            log_amplitude: C64::new(0.0, 0.0),
        };
        state.move_center(0)?;
        state.refresh_schmidt_values(&TruncationPolicy::exact())?;
        state.log_amplitude = C64::new(0.0, 0.0);
        Ok(state)
    }

    pub fn n_sites(&self) -> usize {
        self.tensors.len()
    }

    pub fn ortho_center(&self) -> Option<usize> {
        self.center
    }

    pub fn log_amplitude(&self) -> C64 {
        self.log_amplitude
    }

    /// True once a projection annihilated the state (its amplitude is 0).
    pub fn is_zero(&self) -> bool {
        self.log_amplitude.re == f64::NEG_INFINITY
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    /// Current bond dimensions, one per bond.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors[1..].iter().map(|t| t.shape()[0]).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites() {
            return Err(Error::Shape(format!("site {site} outside a {}-site chain", self.n_sites())));
        }
        Ok(())
    }

    fn dims(&self, site: usize) -> (usize, usize) {
        let s = self.tensors[site].shape();
        (s[0], s[2])
    }

    fn mark_all_stale(&mut self) {
        self.stale.iter_mut().for_each(|s| *s = true);
    }

    fn become_zero(&mut self) {
        let n = self.n_sites();
        let up = Spin::Up.vector();
        self.tensors = (0..n).map(|_| DenseTensor::from_parts(vec![1, 2, 1], up.to_vec())).collect();
        self.center = Some(0);
        self.schmidt = vec![vec![1.0]; n - 1];
        self.stale = vec![false; n - 1];
        self.log_amplitude = C64::new(f64::NEG_INFINITY, 0.0);
    }

    // Center c → c + 1 by QR of the center tensor.
    fn shift_right(&mut self, c: usize) -> Result<()> {
        let (l, r) = self.dims(c);
        let a = std::mem::replace(&mut self.tensors[c], DenseTensor::zeros(vec![1]));
        let (q, rr) = qr(&a.reshaped(vec![2 * l, r]))?;
        let k = q.shape()[1];
        self.tensors[c] = q.reshaped(vec![l, 2, k]);
        let (_, r2) = self.dims(c + 1);
        let next = std::mem::replace(&mut self.tensors[c + 1], DenseTensor::zeros(vec![1]));
        self.tensors[c + 1] = matmul_2d(&rr, &next.reshaped(vec![r, 2 * r2]), Adj::None).reshaped(vec![k, 2, r2]);
        if self.schmidt[c].len() > k {
            self.stale[c] = true;
        }
        self.center = Some(c + 1);
        Ok(())
    }

    // Center c → c - 1 by an LQ factorization of the center tensor.
    fn shift_left(&mut self, c: usize) -> Result<()> {
        let (l, r) = self.dims(c);
        let a = std::mem::replace(&mut self.tensors[c], DenseTensor::zeros(vec![1]));
        let adj = a.reshaped(vec![l, 2 * r]).adjoint()?;
        let (q, rr) = qr(&adj)?;
        let k = q.shape()[1];
        self.tensors[c] = q.adjoint()?.reshaped(vec![k, 2, r]);
        let (l2, _) = self.dims(c - 1);
        let prev = std::mem::replace(&mut self.tensors[c - 1], DenseTensor::zeros(vec![1]));
        let rr_adj = rr.adjoint()?;
        self.tensors[c - 1] = matmul_2d(&prev.reshaped(vec![2 * l2, l]), &rr_adj, Adj::None).reshaped(vec![l2, 2, k]);
        if self.schmidt[c - 1].len() > k {
            self.stale[c - 1] = true;
        }
        self.center = Some(c - 1);
        Ok(())
    }

    fn normalize_center(&mut self) {
        let c = self.center.expect("normalize_center without a center");
        let n = self.tensors[c].norm();
        if n == 0.0 {
            self.become_zero();
            return;
        }
        self.tensors[c].scale(C64::new(1.0 / n, 0.0));
        self.log_amplitude += n.ln();
    }

    /// Moves the orthogonality center to `site`, canonicalizing from scratch
    /// if the state has none.
    pub fn move_center(&mut self, site: usize) -> Result<()> {
        self.check_site(site)?;
        match self.center {
            Some(mut c) => {
                while c < site {
                    self.shift_right(c)?;
                    c += 1;
                }
                while c > site {
                    self.shift_left(c)?;
                    c -= 1;
                }
            }
            None => {
                for c in (site + 1..self.n_sites()).rev() {
                    self.shift_left(c)?;
                }
                for c in 0..site {
                    self.shift_right(c)?;
                }
                self.center = Some(site);
                self.normalize_center();
            }
        }
        Ok(())
    }

    /// Applies a 4×4 unitary to sites `(bond, bond + 1)`, truncates the new
    /// bond under `policy` and renormalizes. The discarded norm is reported,
    /// not folded into the amplitude.
    pub fn apply_two_site_gate(&mut self, bond: usize, gate: &Gate2, policy: &TruncationPolicy) -> Result<TruncationReport> {
        if bond + 1 >= self.n_sites() {
            return Err(Error::Shape(format!("bond {bond} outside a {}-site chain", self.n_sites())));
        }
        let defect = gate.unitarity_defect();
        if defect > 1e-10 {
            return Err(Error::Contract(format!("two-site gate is not unitary (defect {defect:e})")));
        }
        let push_right = self.center.is_none_or(|c| c <= bond);
        match self.center {
            Some(c) if c == bond || c == bond + 1 => {}
            Some(c) if c > bond + 1 => self.move_center(bond + 1)?,
            _ => self.move_center(bond)?,
        }
        let (l, m) = self.dims(bond);
        let (_, r) = self.dims(bond + 1);
        let left = std::mem::replace(&mut self.tensors[bond], DenseTensor::zeros(vec![1]));
        let right = std::mem::replace(&mut self.tensors[bond + 1], DenseTensor::zeros(vec![1]));
        let mut theta = matmul_2d(&left.reshaped(vec![2 * l, m]), &right.reshaped(vec![m, 2 * r]), Adj::None);
        // theta is laid out as [l, s1, s2, r]; each fixed `a` is a 4×r block.
        for block in theta.data_mut().chunks_mut(4 * r) {
            for j in 0..r {
                let v = [block[j], block[r + j], block[2 * r + j], block[3 * r + j]];
                for s in 0..4 {
                    block[s * r + j] = (0..4).map(|t| gate.get(s, t) * v[t]).sum();
                }
            }
        }
        let svd = svd_truncate(&theta.reshaped(vec![2 * l, 2 * r]), policy)?;
        let k = svd.rank();
        let kept: f64 = svd.singular_values.iter().map(|s| s * s).sum::<f64>().sqrt();
        let s: Vec<f64> = svd.singular_values.iter().map(|x| x / kept).collect();
        let mut u = svd.left_isometry;
        let mut vh = svd.right_isometry;
        if push_right {
            for (row, &sv) in vh.data_mut().chunks_mut(2 * r).zip(&s) {
                row.iter_mut().for_each(|z| *z *= sv);
            }
            self.center = Some(bond + 1);
        } else {
            for row in u.data_mut().chunks_mut(k) {
                row.iter_mut().zip(&s).for_each(|(z, &sv)| *z *= sv);
            }
            self.center = Some(bond);
        }
        self.tensors[bond] = u.reshaped(vec![l, 2, k]);
        self.tensors[bond + 1] = vh.reshaped(vec![k, 2, r]);
        self.schmidt[bond] = s;
        self.stale[bond] = false;
        Ok(TruncationReport { discarded_weight: svd.discarded_weight, chi: k, bound: svd.bound })
    }

    /// Applies an arbitrary 2×2 operator to one site. Non-unitary operators
    /// change the norm; the change goes into `log_amplitude`.
    pub fn apply_single_site(&mut self, site: usize, op: &Op1) -> Result<()> {
        self.check_site(site)?;
        self.move_center(site)?;
        let (_, r) = self.dims(site);
        for block in self.tensors[site].data_mut().chunks_mut(2 * r) {
            for j in 0..r {
                let v = [block[j], block[r + j]];
                let w = op.apply(v);
                block[j] = w[0];
                block[r + j] = w[1];
            }
        }
        if !op.is_unitary(1e-12) {
            self.mark_all_stale();
        }
        self.normalize_center();
        Ok(())
    }

    /// Recomputes cached singular values on every stale bond, sweeping left to
    /// right and truncating each bond under `policy`. Returns the largest
    /// discarded weight.
    pub fn refresh_schmidt_values(&mut self, policy: &TruncationPolicy) -> Result<f64> {
        let mut worst = 0.0f64;
        for b in 0..self.stale.len() {
            if !self.stale[b] {
                continue;
            }
            if self.tensors[b + 1].shape()[0] == 1 {
                self.schmidt[b] = vec![1.0];
                self.stale[b] = false;
                continue;
            }
            self.move_center(b)?;
            let (l, r) = self.dims(b);
            let a = std::mem::replace(&mut self.tensors[b], DenseTensor::zeros(vec![1]));
            let svd = svd_truncate(&a.reshaped(vec![2 * l, r]), policy)?;
            worst = worst.max(svd.discarded_weight);
            let k = svd.rank();
            let kept: f64 = svd.singular_values.iter().map(|s| s * s).sum::<f64>().sqrt();
            let s: Vec<f64> = svd.singular_values.iter().map(|x| x / kept).collect();
            let mut svh = svd.right_isometry;
            for (row, &sv) in svh.data_mut().chunks_mut(r).zip(&s) {
                row.iter_mut().for_each(|z| *z *= sv);
            }
            self.tensors[b] = svd.left_isometry.reshaped(vec![l, 2, k]);
            let (_, r2) = self.dims(b + 1);
            let next = std::mem::replace(&mut self.tensors[b + 1], DenseTensor::zeros(vec![1]));
            self.tensors[b + 1] = matmul_2d(&svh, &next.reshaped(vec![r, 2 * r2]), Adj::None).reshaped(vec![k, 2, r2]);
            self.center = Some(b + 1);
            self.schmidt[b] = s;
            self.stale[b] = false;
        }
        Ok(worst)
    }

    /// Normalized Schmidt coefficients across bond `bond`.
    pub fn schmidt_values(&mut self, bond: usize) -> Result<&[f64]> {
        if bond >= self.stale.len() {
            return Err(Error::Shape(format!("bond {bond} outside a {}-site chain", self.n_sites())));
        }
        if self.stale[bond] {
            self.refresh_schmidt_values(&TruncationPolicy::exact())?;
        }
        Ok(&self.schmidt[bond])
    }

    /// `-Σ p ln p` with `p_i = s_i² / Σ s²` across bond `bond`.
    pub fn entanglement_entropy(&mut self, bond: usize) -> Result<f64> {
        Ok(von_neumann_entropy(self.schmidt_values(bond)?))
    }

    pub fn entanglement_profile(&mut self) -> Result<EntanglementProfile> {
        if self.stale.iter().any(|&s| s) {
            self.refresh_schmidt_values(&TruncationPolicy::exact())?;
        }
        Ok(self.cached_profile())
    }

    /// Profile from the singular-value cache, refreshing stale bonds under
    /// `policy` first.
    pub fn compressed_profile(&mut self, policy: &TruncationPolicy) -> Result<EntanglementProfile> {
        self.refresh_schmidt_values(policy)?;
        Ok(self.cached_profile())
    }

    fn cached_profile(&self) -> EntanglementProfile {
        EntanglementProfile {
            entropies: self.schmidt.iter().map(|s| von_neumann_entropy(s)).collect(),
            bond_dims: self.schmidt.iter().map(Vec::len).collect(),
        }
    }

    // ⟨bra| ∏ ops |ket⟩ over sites lo..=hi of the site tensors only, with an
    // identity left boundary and a traced right boundary.
    fn transfer(bra: &[DenseTensor], ket: &[DenseTensor], lo: usize, hi: usize, ops: &[(usize, Op1)]) -> C64 {
        let d0 = ket[lo].shape()[0];
        let mut env = DenseTensor::identity(d0);
        for i in lo..=hi {
            let k = &ket[i];
            let b = &bra[i];
            let (kl, kr) = (k.shape()[0], k.shape()[2]);
            let (bl, br) = (b.shape()[0], b.shape()[2]);
            let mut t = matmul_2d(&env, &k.clone().reshaped(vec![kl, 2 * kr]), Adj::None);
            if let Some((_, op)) = ops.iter().find(|(s, _)| *s == i) {
                for block in t.data_mut().chunks_mut(2 * kr) {
                    for j in 0..kr {
                        let w = op.apply([block[j], block[kr + j]]);
                        block[j] = w[0];
                        block[kr + j] = w[1];
                    }
                }
            }
            let t = t.reshaped(vec![bl * 2, kr]);
            env = matmul_2d(&b.clone().reshaped(vec![bl * 2, br]), &t, Adj::Left);
        }
        let n = env.shape()[0].min(env.shape()[1]);
        (0..n).map(|i| env.get(&[i, i])).sum()
    }

    /// Normalized `⟨Ψ| ∏_k O_k |Ψ⟩ / ⟨Ψ|Ψ⟩` for operators on distinct sites.
    pub fn expect_product(&self, ops: &[(usize, Op1)]) -> Result<C64> {
        for (s, _) in ops {
            self.check_site(*s)?;
        }
        let (lo, hi, norm) = match self.center {
            Some(c) => {
                let lo = ops.iter().map(|o| o.0).chain([c]).min().unwrap();
                let hi = ops.iter().map(|o| o.0).chain([c]).max().unwrap();
                (lo, hi, self.tensors[c].norm().powi(2))
            }
            None => {
                let hi = self.n_sites() - 1;
                (0, hi, Self::transfer(&self.tensors, &self.tensors, 0, hi, &[]).re)
            }
        };
        Ok(Self::transfer(&self.tensors, &self.tensors, lo, hi, ops) / norm)
    }

    /// `⟨Ψ|O_site|Ψ⟩ / ⟨Ψ|Ψ⟩` for a Hermitian `op`.
    pub fn expect_local(&self, site: usize, op: &Op1) -> Result<f64> {
        if !op.is_hermitian(1e-12) {
            return Err(Error::Contract("expect_local needs a Hermitian operator".into()));
        }
        Ok(self.expect_product(&[(site, *op)])?.re)
    }

    /// `⟨O_a O_b⟩` on the normalized state. Equal sites use the operator
    /// product `O_a O_b`.
    pub fn expect_two_site(&self, site_a: usize, op_a: &Op1, site_b: usize, op_b: &Op1) -> Result<f64> {
        if !op_a.is_hermitian(1e-12) || !op_b.is_hermitian(1e-12) {
            return Err(Error::Contract("expect_two_site needs Hermitian operators".into()));
        }
        let value = if site_a == site_b {
            self.expect_product(&[(site_a, *op_a * *op_b)])?
        } else {
            self.expect_product(&[(site_a, *op_a), (site_b, *op_b)])?
        };
        Ok(value.re)
    }

    /// Unnormalized bilinear form `⟨bra| O_site |ket⟩` including both
    /// amplitude factors.
    pub fn cross_expect(bra: &MpsState, ket: &MpsState, site: usize, op: &Op1) -> Result<C64> {
        if bra.n_sites() != ket.n_sites() {
            return Err(Error::Shape(format!(
                "cross expectation between {} and {} sites",
                bra.n_sites(),
                ket.n_sites()
            )));
        }
        ket.check_site(site)?;
        if bra.is_zero() || ket.is_zero() {
            return Ok(C64::new(0.0, 0.0));
        }
        let raw = Self::transfer(&bra.tensors, &ket.tensors, 0, ket.n_sites() - 1, &[(site, *op)]);
        Ok(raw * (bra.log_amplitude.conj() + ket.log_amplitude).exp())
    }

    /// `⟨bra|ket⟩` including amplitudes.
    pub fn overlap(bra: &MpsState, ket: &MpsState) -> Result<C64> {
        Self::cross_expect(bra, ket, 0, &Op1::identity())
    }

    /// `⟨Ψ|Ψ⟩` including the amplitude.
    pub fn norm_squared(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let hi = self.n_sites() - 1;
        Self::transfer(&self.tensors, &self.tensors, 0, hi, &[]).re * (2.0 * self.log_amplitude.re).exp()
    }

    /// Reduced density matrix of one site, `ρ_ij = ⟨Ψ| (|j⟩⟨i|) |Ψ⟩`.
    pub fn one_body_rdm(&self, site: usize) -> Result<OneBodyRdm> {
        let e = |i: usize, j: usize| {
            let mut m = [C64::new(0.0, 0.0); 4];
            m[2 * j + i] = C64::new(1.0, 0.0);
            self.expect_product(&[(site, Op1(m))])
        };
        let r00 = e(0, 0)?.re;
        let r11 = e(1, 1)?.re;
        let r01 = e(0, 1)?;
        Ok(OneBodyRdm::from_matrix(Op1::new(C64::new(r00, 0.0), r01, r01.conj(), C64::new(r11, 0.0))))
    }

    // M[a, b] = Σ_s conj(v[s]) A[a, s, b] for the center tensor at `site`.
    fn local_projection(&self, site: usize, v: [C64; 2]) -> DenseTensor {
        let (l, r) = self.dims(site);
        let a = self.tensors[site].data();
        let mut m = Vec::with_capacity(l * r);
        for block in a.chunks(2 * r) {
            for j in 0..r {
                m.push(v[0].conj() * block[j] + v[1].conj() * block[r + j]);
            }
        }
        DenseTensor::from_parts(vec![l, r], m)
    }

    /// Born probabilities of the two basis outcomes at `site`.
    pub fn branch_probabilities(&mut self, site: usize, basis: &Basis) -> Result<[f64; 2]> {
        check_basis(basis)?;
        self.move_center(site)?;
        Ok(basis.map(|v| self.local_projection(site, v).norm().powi(2)))
    }

    fn check_outcome(v: &[C64; 2]) -> Result<()> {
        let n = v[0].norm_sqr() + v[1].norm_sqr();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!("outcome vector has squared norm {n}")));
        }
        Ok(())
    }

    // Replaces the state by (⟨v|_site ⊗ I)|Ψ⟩ / sqrt(scale) re-embedded as a
    // product factor `v` at `site`. `scale = None` uses this state's own Born
    // probability. Returns that Born probability.
    fn project_scaled(&mut self, site: usize, v: [C64; 2], scale: Option<f64>) -> Result<f64> {
        self.check_site(site)?;
        Self::check_outcome(&v)?;
        if self.is_zero() {
            return Ok(0.0);
        }
        self.move_center(site)?;
        let mut m = self.local_projection(site, v);
        let q = m.norm().powi(2);
        match scale {
            None if q < ZERO_PROBABILITY => {
                return Err(Error::ZeroProbability { site, probability: q });
            }
            Some(_) if q == 0.0 => {
                self.become_zero();
                return Ok(0.0);
            }
            _ => {}
        }
        m.scale(C64::new(1.0 / q.sqrt(), 0.0));
        let (l, r) = self.dims(site);
        let n = self.n_sites();

        let cutoff = TruncationPolicy::exact();
        let svd = svd_truncate(&m, &cutoff)?;
        let smax = svd.singular_values[0];
        let k = svd.singular_values.iter().take_while(|&&s| s > NUMERICAL_ZERO * smax).count().max(1);
        let mut s: Vec<f64> = svd.singular_values[..k].to_vec();
        let kept = s.iter().map(|x| x * x).sum::<f64>().sqrt();
        s.iter_mut().for_each(|x| *x /= kept);
        let u = DenseTensor::from_fn(vec![l, k], |ix| svd.left_isometry.get(&[ix[0], ix[1]]));
        let svh = DenseTensor::from_fn(vec![k, r], |ix| svd.right_isometry.get(&[ix[0], ix[1]]) * s[ix[0]]);

        let embed = DenseTensor::from_fn(vec![k, 2, k], |ix| if ix[0] == ix[2] { v[ix[1]] } else { C64::new(0.0, 0.0) });
        self.tensors[site] = embed;
        if site + 1 < n {
            // Left factor into the left neighbour (or a 1×1 phase at the edge).
            if site > 0 {
                let (l2, _) = self.dims(site - 1);
                let prev = std::mem::replace(&mut self.tensors[site - 1], DenseTensor::zeros(vec![1]));
                self.tensors[site - 1] = matmul_2d(&prev.reshaped(vec![2 * l2, l]), &u, Adj::None).reshaped(vec![l2, 2, k]);
                let (_, r2) = self.dims(site + 1);
                let next = std::mem::replace(&mut self.tensors[site + 1], DenseTensor::zeros(vec![1]));
                self.tensors[site + 1] = matmul_2d(&svh, &next.reshaped(vec![r, 2 * r2]), Adj::None).reshaped(vec![k, 2, r2]);
            } else {
                let us = matmul_2d(&u, &svh, Adj::None);
                let (_, r2) = self.dims(site + 1);
                let next = std::mem::replace(&mut self.tensors[site + 1], DenseTensor::zeros(vec![1]));
                self.tensors[site + 1] = matmul_2d(&us, &next.reshaped(vec![r, 2 * r2]), Adj::None).reshaped(vec![1, 2, r2]);
                self.tensors[site] = DenseTensor::from_parts(vec![1, 2, 1], v.to_vec());
            }
            self.center = Some(site + 1);
        } else if site > 0 {
            // Last site: r = 1, so the whole normalized projection folds left.
            let (l2, _) = self.dims(site - 1);
            let prev = std::mem::replace(&mut self.tensors[site - 1], DenseTensor::zeros(vec![1]));
            self.tensors[site - 1] = matmul_2d(&prev.reshaped(vec![2 * l2, l]), &m, Adj::None).reshaped(vec![l2, 2, 1]);
            self.tensors[site] = DenseTensor::from_parts(vec![1, 2, 1], v.to_vec());
            self.center = Some(site - 1);
            s = vec![1.0];
        } else {
            let phase = m.data()[0];
            self.tensors[site] = DenseTensor::from_parts(vec![1, 2, 1], vec![v[0] * phase, v[1] * phase]);
            self.center = Some(0);
        }

        self.mark_all_stale();
        if site > 0 {
            self.schmidt[site - 1] = s.clone();
            self.stale[site - 1] = false;
        }
        if site + 1 < n {
            self.schmidt[site] = s;
            self.stale[site] = false;
        }
        if let Some(p) = scale {
            self.log_amplitude += 0.5 * (q.ln() - p.ln());
        }
        Ok(q)
    }

    /// Projects `site` onto the normalized vector `outcome` and renormalizes.
    /// Returns the Born probability of that outcome.
    pub fn project_site(&mut self, site: usize, outcome: [C64; 2]) -> Result<f64> {
        self.project_scaled(site, outcome, None)
    }

    /// Projects onto `outcome` but divides by `sqrt(reference_probability)`
    /// instead of this state's own norm, so the result is `P|Ψ⟩ / sqrt(p)`.
    /// Returns this state's own Born probability `‖P|Ψ⟩‖² / ‖Ψ‖²`.
    pub fn project_site_with_reference(&mut self, site: usize, outcome: [C64; 2], reference_probability: f64) -> Result<f64> {
        if !(reference_probability > 0.0) {
            return Err(Error::ZeroProbability { site, probability: reference_probability });
        }
        self.project_scaled(site, outcome, Some(reference_probability))
    }

    /// Chooses an outcome of `basis` at `site` with `chooser` and projects
    /// onto it. Returns the outcome index and its Born probability.
    pub fn measure_site(&mut self, site: usize, basis: &Basis, chooser: &mut dyn OutcomeChooser) -> Result<(usize, f64)> {
        let probs = self.branch_probabilities(site, basis)?;
        let k = chooser.choose(probs);
        if probs[k] < ZERO_PROBABILITY {
            return Err(Error::ZeroProbability { site, probability: probs[k] });
        }
        let p = self.project_site(site, basis[k])?;
        Ok((k, p))
    }

    /// Born-rule sample of `site` in `basis` followed by projection.
    pub fn sample_site<R: Rng>(&mut self, site: usize, basis: &Basis, rng: &mut R) -> Result<(usize, f64)> {
        self.measure_site(site, basis, &mut RngChooser(rng))
    }

    /// Samples an eigenvector of the one-site RDM with probability equal to
    /// its eigenvalue and projects onto it. Returns the eigen-index and
    /// eigenvalue.
    pub fn rdm_sample_site<R: Rng>(&mut self, site: usize, rng: &mut R) -> Result<(usize, f64)> {
        let rdm = self.one_body_rdm(site)?;
        let k = RngChooser(rng).choose(rdm.eigenvalues);
        self.project_site(site, rdm.eigenvectors[k])?;
        Ok((k, rdm.eigenvalues[k]))
    }

    /// Dense amplitudes (site 0 is the most significant bit), including the
    /// amplitude factor. Limited to 20 sites.
    pub fn to_state_vector(&self) -> Result<Vec<C64>> {
        let n = self.n_sites();
        if n > 20 {
            return Err(Error::Capacity(format!("dense vector of {n} sites")));
        }
        let mut acc = DenseTensor::from_parts(vec![1, 1], vec![C64::new(1.0, 0.0)]);
        for t in &self.tensors {
            let (l, r) = (t.shape()[0], t.shape()[2]);
            let rows = acc.shape()[0];
            acc = matmul_2d(&acc, &t.clone().reshaped(vec![l, 2 * r]), Adj::None).reshaped(vec![rows * 2, r]);
        }
        let amp = if self.is_zero() { C64::new(0.0, 0.0) } else { self.log_amplitude.exp() };
        Ok(acc.into_data().into_iter().map(|z| z * amp).collect())
    }

    /// Largest deviation from the mixed-canonical conditions around the
    /// current center.
    pub fn canonical_defect(&self) -> f64 {
        let Some(c) = self.center else { return f64::INFINITY };
        let mut worst = 0.0f64;
        for (i, t) in self.tensors.iter().enumerate() {
            let (l, r) = (t.shape()[0], t.shape()[2]);
            if i < c {
                let m = t.clone().reshaped(vec![2 * l, r]);
                worst = worst.max(matmul_2d(&m, &m, Adj::Left).max_abs_diff(&DenseTensor::identity(r)));
            } else if i > c {
                let m = t.clone().reshaped(vec![l, 2 * r]).adjoint().unwrap();
                worst = worst.max(matmul_2d(&m, &m, Adj::Left).max_abs_diff(&DenseTensor::identity(l)));
            }
        }
        worst
    }
}

fn check_basis(basis: &Basis) -> Result<()> {
    let [a, b] = basis;
    let ip = a[0].conj() * b[0] + a[1].conj() * b[1];
    let na = a[0].norm_sqr() + a[1].norm_sqr();
    let nb = b[0].norm_sqr() + b[1].norm_sqr();
    if ip.norm() > 1e-12 || (na - 1.0).abs() > 1e-12 || (nb - 1.0).abs() > 1e-12 {
        return Err(Error::Contract("measurement basis is not orthonormal".into()));
    }
    Ok(())
}

/// `-Σ p ln p` over `p_i = s_i² / Σ_j s_j²`.
pub fn von_neumann_entropy(singular_values: &[f64]) -> f64 {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let h: f64 = singular_values
        .iter()
        .map(|s| s * s / total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum();
    h.max(0.0)
}
