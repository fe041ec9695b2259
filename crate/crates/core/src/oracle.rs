//! Dense state-vector reference for small chains.
//!
//! Amplitudes are indexed with site 0 as the most significant bit, matching
//! [`MpsState::to_state_vector`]. Everything here is independent of the MPS
//! machinery except [`enumerate_branches`], which deliberately drives the
//! production SEBD engine with a scripted outcome chooser so that the code
//! under test is the shipping code path.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::{
    circuit::{build, kicked_ising_period, BrickworkCircuit, Layer, ModelParams},
    engine::{apply_schedule, run_sebd_with_chooser, run_tebd, EngineConfig, ProjectionBasis},
    error::{Error, Result},
    estimators::{EstimateMap, EstimatorSuite, ObservableSpec, Protocol},
    mps::{MpsState, OutcomeChooser, ZERO_PROBABILITY},
    operators::{Axis, Gate2, Op1},
    schedule::{assign_cones, assign_cones_mirrored, LightConeSchedule},
    tensor::TruncationPolicy,
};

/// Largest chain the dense oracle accepts.
pub const MAX_DENSE_SITES: usize = 14;
/// Largest chain accepted for exhaustive branch enumeration.
pub const MAX_ENUMERATION_SITES: usize = 6;
/// Default cap on enumerated measurement branches.
pub const DEFAULT_BRANCH_BUDGET: usize = 4096;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    amps: Vec<C64>,
    n: usize,
}

fn check_capacity(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DENSE_SITES {
        return Err(Error::Capacity(format!("dense oracle supports 1..={MAX_DENSE_SITES} sites, got {n}")));
    }
    Ok(())
}

impl DenseState {
    pub fn new(n_sites: usize, amplitudes: Vec<C64>) -> Result<Self> {
        check_capacity(n_sites)?;
        if amplitudes.len() != 1 << n_sites {
            return Err(Error::Shape(format!("{} amplitudes for {n_sites} sites", amplitudes.len())));
        }
        Ok(Self { amps: amplitudes, n: n_sites })
    }

    /// Computational basis state; `bits[s] = 1` means spin down at site `s`.
    pub fn basis_state(bits: &[u8]) -> Result<Self> {
        let n = bits.len();
        check_capacity(n)?;
        let index = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b as usize & 1));
        let mut amps = vec![ZERO; 1 << n];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { amps, n })
    }

    pub fn neel(n_sites: usize) -> Result<Self> {
        let bits: Vec<u8> = (0..n_sites).map(|s| (s % 2) as u8).collect();
        Self::basis_state(&bits)
    }

    pub fn from_mps(state: &MpsState) -> Result<Self> {
        check_capacity(state.n_sites())?;
        Self::new(state.n_sites(), state.to_state_vector()?)
    }

    pub fn n_sites(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    fn shift(&self, site: usize) -> usize {
        self.n - 1 - site
    }

    pub fn norm_squared(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &DenseState) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn apply_op(&mut self, site: usize, op: &Op1) -> Result<()> {
        if site >= self.n {
            return Err(Error::Shape(format!("site {site} outside {} sites", self.n)));
        }
        let bit = 1 << self.shift(site);
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let v = [self.amps[i], self.amps[i | bit]];
                let w = op.apply(v);
                self.amps[i] = w[0];
                self.amps[i | bit] = w[1];
            }
        }
        Ok(())
    }

    pub fn apply_gate(&mut self, bond: usize, gate: &Gate2) -> Result<()> {
        if bond + 1 >= self.n {
            return Err(Error::Shape(format!("bond {bond} outside {} sites", self.n)));
        }
        let hi = 1 << self.shift(bond);
        let lo = 1 << self.shift(bond + 1);
        for i in 0..self.amps.len() {
            if i & (hi | lo) == 0 {
                let idx = [i, i | lo, i | hi, i | hi | lo];
                let v = idx.map(|k| self.amps[k]);
                for (r, &k) in idx.iter().enumerate() {
                    self.amps[k] = (0..4).map(|c| gate.get(r, c) * v[c]).sum();
                }
            }
        }
        Ok(())
    }

    /// `⟨Ψ| ∏ O_k |Ψ⟩ / ⟨Ψ|Ψ⟩` for operators on distinct sites.
    pub fn expect(&self, ops: &[(usize, Op1)]) -> Result<C64> {
        Ok(self.cross(ops, self)? / self.norm_squared())
    }

    /// Unnormalized `⟨self| ∏ O_k |ket⟩`.
    pub fn cross(&self, ops: &[(usize, Op1)], ket: &DenseState) -> Result<C64> {
        if ket.n != self.n {
            return Err(Error::Shape(format!("{} and {} sites", self.n, ket.n)));
        }
        let mut phi = ket.clone();
        for (s, op) in ops {
            phi.apply_op(*s, op)?;
        }
        Ok(self.inner(&phi))
    }

    /// Normalized reduced density matrix of `sites` (row-major,
    /// `2^k × 2^k`, first listed site most significant).
    pub fn reduced_density_matrix(&self, sites: &[usize]) -> Result<Vec<C64>> {
        if sites.iter().any(|&s| s >= self.n) {
            return Err(Error::Shape("rdm site out of range".into()));
        }
        let k = sites.len();
        let d = 1 << k;
        let kept_mask: usize = sites.iter().map(|&s| 1 << self.shift(s)).sum();
        let sub = |i: usize| sites.iter().fold(0usize, |acc, &s| (acc << 1) | ((i >> self.shift(s)) & 1));
        let mut rho = vec![ZERO; d * d];
        let norm = self.norm_squared();
        for i in 0..self.amps.len() {
            for j in 0..self.amps.len() {
                if i & !kept_mask == j & !kept_mask {
                    rho[sub(i) * d + sub(j)] += self.amps[i] * self.amps[j].conj() / norm;
                }
            }
        }
        Ok(rho)
    }

    /// Born probability of finding `site` in the normalized state `v`.
    pub fn marginal(&self, site: usize, v: [C64; 2]) -> Result<f64> {
        let rho = self.reduced_density_matrix(&[site])?;
        let mut p = ZERO;
        for a in 0..2 {
            for b in 0..2 {
                p += v[a].conj() * rho[2 * a + b] * v[b];
            }
        }
        Ok(p.re)
    }

    /// `min_φ ‖self − e^{iφ} other‖` over a global phase.
    pub fn distance_up_to_phase(&self, other: &DenseState) -> f64 {
        let ov = other.inner(self);
        let phase = if ov.norm() > 0.0 { ov / ov.norm() } else { C64::new(1.0, 0.0) };
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - phase * b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

fn apply_layers(state: &mut DenseState, layers: &[Layer]) -> Result<()> {
    for layer in layers {
        for (bond, gate) in &layer.gates {
            state.apply_gate(*bond, gate)?;
        }
    }
    Ok(())
}

/// Every gate of `circuit` in layer order.
pub fn evolve_dense(state: &DenseState, circuit: &BrickworkCircuit) -> Result<DenseState> {
    check_capacity(circuit.n_sites())?;
    if state.n != circuit.n_sites() {
        return Err(Error::Shape(format!("{}-site state, {}-site circuit", state.n, circuit.n_sites())));
    }
    let mut out = state.clone();
    apply_layers(&mut out, circuit.layers())?;
    Ok(out)
}

/// `U†` of a circuit: adjoint gates in reverse order.
pub fn evolve_dense_adjoint(state: &DenseState, circuit: &BrickworkCircuit) -> Result<DenseState> {
    let mut out = state.clone();
    for layer in circuit.layers().iter().rev() {
        for (bond, gate) in layer.gates.iter().rev() {
            out.apply_gate(*bond, &gate.adjoint())?;
        }
    }
    Ok(out)
}

/// Gates of cones `0..cones` of `schedule`, in schedule order.
pub fn apply_cones_dense(state: &DenseState, schedule: &LightConeSchedule, cones: usize) -> Result<DenseState> {
    let mut out = state.clone();
    for cone in &schedule.cones()[..cones.min(schedule.cell_count())] {
        for g in &cone.gates {
            out.apply_gate(g.bond(), &g.gate)?;
        }
    }
    Ok(out)
}

/// One exact kicked Ising period: the Ising phase
/// `exp(-i(J Σ σᶻσᶻ + h Σ σᶻ))` followed by `exp(-iπ/4 σˣ)` on every site.
pub fn kicked_ising_floquet(state: &DenseState, j: f64, h: f64) -> DenseState {
    let n = state.n;
    let mut amps = state.amps.clone();
    for (i, a) in amps.iter_mut().enumerate() {
        let z: Vec<f64> = (0..n).map(|s| if (i >> (n - 1 - s)) & 1 == 0 { 1.0 } else { -1.0 }).collect();
        let energy = j * z.windows(2).map(|w| w[0] * w[1]).sum::<f64>() + h * z.iter().sum::<f64>();
        *a *= C64::from_polar(1.0, -energy);
    }
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let kick = Op1::new(C64::new(c, 0.0), C64::new(0.0, -c), C64::new(0.0, -c), C64::new(c, 0.0));
    let mut out = DenseState { amps, n };
    for s in 0..n {
        out.apply_op(s, &kick).expect("site in range");
    }
    out
}

/// Dense `H = Σ_b S_b · S_{b+1}`, row-major.
pub fn heisenberg_hamiltonian(n_sites: usize) -> Result<Vec<C64>> {
    check_capacity(n_sites)?;
    let d = 1usize << n_sites;
    let mut h = vec![ZERO; d * d];
    for i in 0..d {
        for b in 0..n_sites - 1 {
            let (p, q) = (n_sites - 1 - b, n_sites - 2 - b);
            let (x, y) = ((i >> p) & 1, (i >> q) & 1);
            if x == y {
                h[i * d + i] += 0.25;
            } else {
                h[i * d + i] -= 0.25;
                let flipped = i ^ (1 << p) ^ (1 << q);
                h[flipped * d + i] += 0.5;
            }
        }
    }
    Ok(h)
}

/// `exp(-i t H)` for a dense Hermitian `H` of dimension `d`.
pub fn exact_propagator(h: &[C64], d: usize, t: f64) -> Result<Vec<C64>> {
    let m = Mat::<C64>::from_fn(d, d, |i, j| h[i * d + j]);
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e:?}")))?;
    let u = eig.U();
    let s = eig.S().column_vector();
    let phases: Vec<C64> = (0..d).map(|k| C64::from_polar(1.0, -t * s[k].re)).collect();
    let mut out = vec![ZERO; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = (0..d).map(|k| u[(i, k)] * phases[k] * u[(j, k)].conj()).sum();
        }
    }
    Ok(out)
}

/// Matrix of a circuit, built column by column from basis states.
pub fn circuit_matrix(circuit: &BrickworkCircuit) -> Result<Vec<C64>> {
    let n = circuit.n_sites();
    check_capacity(n)?;
    let d = 1usize << n;
    let mut out = vec![ZERO; d * d];
    for col in 0..d {
        let mut amps = vec![ZERO; d];
        amps[col] = C64::new(1.0, 0.0);
        let v = evolve_dense(&DenseState { amps, n }, circuit)?;
        for (row, z) in v.amps.iter().enumerate() {
            out[row * d + col] = *z;
        }
    }
    Ok(out)
}

/// Largest singular value of `a − b` for `d × d` row-major matrices.
pub fn operator_norm_distance(a: &[C64], b: &[C64], d: usize) -> Result<f64> {
    let m = Mat::<C64>::from_fn(d, d, |i, j| a[i * d + j] - b[i * d + j]);
    let svd = m.thin_svd().map_err(|e| Error::Linalg(format!("svd failed: {e:?}")))?;
    Ok(svd.S().column_vector().iter().map(|z| z.re).fold(0.0, f64::max))
}

/// `⟨Ψ₀| U† S^α_ℓ U S^β_ref |Ψ₀⟩` computed in the Heisenberg picture.
pub fn unequal_time_dense(
    initial: &DenseState,
    circuit: &BrickworkCircuit,
    site: usize,
    alpha: Axis,
    reference: usize,
    beta: Axis,
) -> Result<C64> {
    let mut phi = initial.clone();
    phi.apply_op(reference, &Op1::spin(beta))?;
    let mut phi = evolve_dense(&phi, circuit)?;
    phi.apply_op(site, &Op1::spin(alpha))?;
    let phi = evolve_dense_adjoint(&phi, circuit)?;
    Ok(initial.inner(&phi) / initial.norm_squared())
}

/// Exact value of every estimator target in `suite` on a dense evolution.
pub fn exact_estimates(initial: &DenseState, circuit: &BrickworkCircuit, suite: &EstimatorSuite) -> Result<EstimateMap> {
    use crate::estimators::ObservableKind;
    let n = initial.n;
    let psi = evolve_dense(initial, circuit)?;
    let mut out = suite.empty_values();
    for spec in suite.specs() {
        let labels = spec.labels();
        for s in 0..n {
            let a = Op1::spin(spec.alpha);
            match spec.kind {
                ObservableKind::OnePoint => {
                    out.get_mut(&labels[0]).unwrap()[s] = Some(psi.expect(&[(s, a)])?.re);
                }
                ObservableKind::EqualTime { reference, beta } => {
                    let b = Op1::spin(beta);
                    let v = if reference == s { psi.expect(&[(s, a * b)])? } else { psi.expect(&[(reference, a), (s, b)])? };
                    out.get_mut(&labels[0]).unwrap()[s] = Some(v.re);
                }
                ObservableKind::UnequalTime { reference, beta } => {
                    let z = unequal_time_dense(initial, circuit, s, spec.alpha, reference, beta)?;
                    out.get_mut(&labels[0]).unwrap()[s] = Some(z.re);
                    out.get_mut(&labels[1]).unwrap()[s] = Some(z.im);
                }
            }
        }
    }
    Ok(out)
}

/// Chooser that replays a fixed prefix of outcomes, then always takes the
/// first possible outcome, remembering where an alternative existed.
struct ScriptedChooser {
    prefix: Vec<usize>,
    taken: Vec<usize>,
    alternative: Vec<bool>,
}

impl OutcomeChooser for ScriptedChooser {
    fn choose(&mut self, p: [f64; 2]) -> usize {
        let depth = self.taken.len();
        let k = match self.prefix.get(depth) {
            Some(&k) => k,
            None if p[0] >= ZERO_PROBABILITY => 0,
            None => 1,
        };
        self.taken.push(k);
        self.alternative.push(depth >= self.prefix.len() && k == 0 && p[1] >= ZERO_PROBABILITY);
        k
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Enumeration {
    /// `Σ_m p_m · estimate_m` per label and site.
    pub expectations: EstimateMap,
    /// `Σ_m p_m`.
    pub total_probability: f64,
    pub branches: usize,
}

/// Runs the SEBD engine down every measurement branch with non-zero
/// probability and returns Born-weighted sums of all estimators.
pub fn enumerate_branches(
    initial: &MpsState,
    schedule: &LightConeSchedule,
    config: &EngineConfig,
    suite: &EstimatorSuite,
    budget: usize,
) -> Result<Enumeration> {
    if initial.n_sites() > MAX_ENUMERATION_SITES {
        return Err(Error::Capacity(format!(
            "branch enumeration supports up to {MAX_ENUMERATION_SITES} sites, got {}",
            initial.n_sites()
        )));
    }
    let mut expectations: EstimateMap = suite.empty_values();
    let mut seen: std::collections::BTreeMap<String, Vec<bool>> =
        expectations.keys().map(|k| (k.clone(), vec![false; initial.n_sites()])).collect();
    let mut missing = seen.clone();
    let mut total = 0.0;
    let mut branches = 0;
    let mut stack: Vec<Vec<usize>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        branches += 1;
        if branches > budget {
            return Err(Error::Capacity(format!("more than {budget} measurement branches")));
        }
        let mut chooser = ScriptedChooser { prefix, taken: Vec::new(), alternative: Vec::new() };
        let record = run_sebd_with_chooser(initial, schedule, config, suite, &mut chooser, 0)?;
        for d in (0..chooser.taken.len()).rev() {
            if chooser.alternative[d] {
                let mut next = chooser.taken[..d].to_vec();
                next.push(1);
                stack.push(next);
            }
        }
        let p = record.born_weight;
        total += p;
        for (label, values) in &record.estimates {
            let acc = expectations.get_mut(label).expect("same suite");
            for (s, v) in values.iter().enumerate() {
                match v {
                    Some(x) => {
                        acc[s] = Some(acc[s].unwrap_or(0.0) + p * x);
                        seen.get_mut(label).unwrap()[s] = true;
                    }
                    None => missing.get_mut(label).unwrap()[s] = true,
                }
            }
        }
    }
    // A site that is estimated on some branches but not others has no
    // well-defined average.
    for (label, values) in expectations.iter_mut() {
        for (s, v) in values.iter_mut().enumerate() {
            if missing[label][s] && seen[label][s] {
                *v = None;
            }
        }
    }
    Ok(Enumeration { expectations, total_probability: total, branches })
}

/// Result of one oracle comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub error: f64,
    pub tolerance: f64,
}

impl CheckReport {
    fn new(name: impl Into<String>, error: f64, tolerance: f64) -> Self {
        Self { name: name.into(), passed: error <= tolerance, error, tolerance }
    }
}

/// Largest entrywise difference between the circuit's first period and the
/// exact Floquet operator, over all basis states.
pub fn period_identity_error(period: &BrickworkCircuit, j: f64, h: f64) -> Result<f64> {
    let n = period.n_sites();
    let one = period.truncated(1)?;
    let mut worst = 0.0f64;
    for col in 0..1usize << n {
        let bits: Vec<u8> = (0..n).map(|s| ((col >> (n - 1 - s)) & 1) as u8).collect();
        let e = DenseState::basis_state(&bits)?;
        let a = evolve_dense(&e, &one)?;
        let b = kicked_ising_floquet(&e, j, h);
        worst = a.amps.iter().zip(&b.amps).map(|(x, y)| (x - y).norm()).fold(worst, f64::max);
    }
    Ok(worst)
}

pub fn check_period_identity(n_sites: usize, j: f64, h: f64) -> Result<CheckReport> {
    let circuit = BrickworkCircuit::from_layers(n_sites, 1.0, kicked_ising_period(n_sites, j, h).to_vec())?;
    let err = period_identity_error(&circuit, j, h)?;
    Ok(CheckReport::new(format!("period_identity_n{n_sites}"), err, 1e-10))
}

/// Max amplitude difference (up to phase) between MPS TEBD with `policy` and
/// dense evolution of the same circuit.
pub fn check_tebd_vs_dense(name: &str, initial: &MpsState, circuit: &BrickworkCircuit, policy: TruncationPolicy, tol: f64) -> Result<CheckReport> {
    let dense = evolve_dense(&DenseState::from_mps(initial)?, circuit)?;
    let (mps, _) = run_tebd(initial.clone(), circuit, &EngineConfig::tebd(policy))?;
    let err = DenseState::from_mps(&mps)?.distance_up_to_phase(&dense);
    Ok(CheckReport::new(name, err, tol))
}

/// Dense schedule-order evolution against dense layer-order evolution.
pub fn check_schedule_equivalence(name: &str, initial: &DenseState, circuit: &BrickworkCircuit, schedule: &LightConeSchedule) -> Result<CheckReport> {
    let layered = evolve_dense(initial, circuit)?;
    let coned = apply_cones_dense(initial, schedule, schedule.cell_count())?;
    let err = layered.distance_up_to_phase(&coned);
    Ok(CheckReport::new(name, err, 1e-10))
}

/// MPS cone-order evolution without measurement against MPS TEBD (ε = 0).
pub fn check_sebd_order_vs_tebd(name: &str, initial: &MpsState, circuit: &BrickworkCircuit) -> Result<CheckReport> {
    let policy = TruncationPolicy::exact();
    let mut coned = initial.clone();
    apply_schedule(&mut coned, &assign_cones(circuit), &policy)?;
    let (layered, _) = run_tebd(initial.clone(), circuit, &EngineConfig::tebd(policy))?;
    let err = DenseState::from_mps(&coned)?.distance_up_to_phase(&DenseState::from_mps(&layered)?);
    Ok(CheckReport::new(name, err, 1e-10))
}

/// Largest deviation between enumerated SEBD averages and dense values, and
/// between the total branch probability and 1.
pub fn check_enumeration(
    name: &str,
    initial: &MpsState,
    circuit: &BrickworkCircuit,
    schedule: &LightConeSchedule,
    basis: ProjectionBasis,
    specs: Vec<ObservableSpec>,
) -> Result<CheckReport> {
    let suite = EstimatorSuite::new(specs, initial.n_sites(), basis)?;
    let config = EngineConfig::sebd(TruncationPolicy::exact(), basis);
    let en = enumerate_branches(initial, schedule, &config, &suite, DEFAULT_BRANCH_BUDGET)?;
    let exact = exact_estimates(&DenseState::from_mps(initial)?, circuit, &suite)?;
    let mut err = (en.total_probability - 1.0).abs();
    let mut compared = 0usize;
    for (label, values) in &en.expectations {
        for (s, v) in values.iter().enumerate() {
            if let (Some(a), Some(b)) = (v, exact[label][s]) {
                err = err.max((a - b).abs());
                compared += 1;
            }
        }
    }
    if compared == 0 {
        return Err(Error::Contract(format!("{name}: enumeration produced no comparable values")));
    }
    Ok(CheckReport::new(name, err, 1e-10))
}

/// The standing oracle suite.
pub fn verify_all() -> Result<Vec<CheckReport>> {
    let (j, h) = (std::f64::consts::PI / 8.0, 0.2);
    let mut out = Vec::new();
    for n in 2..=8 {
        out.push(check_period_identity(n, j, h)?);
    }
    let ki8 = build(&ModelParams::kicked_ising(8, j, h, 4.0))?;
    out.push(check_tebd_vs_dense("tebd_vs_dense_kicked_ising_n8", &MpsState::neel(8)?, &ki8, TruncationPolicy::exact(), 1e-10)?);
    let he8 = build(&ModelParams::heisenberg(8, 0.1, 1.0))?;
    out.push(check_tebd_vs_dense("tebd_vs_dense_heisenberg_n8", &MpsState::neel(8)?, &he8, TruncationPolicy::exact(), 1e-10)?);
    out.push(check_schedule_equivalence("schedule_equivalence_n8", &DenseState::neel(8)?, &ki8, &assign_cones(&ki8))?);
    out.push(check_schedule_equivalence("mirrored_schedule_equivalence_n8", &DenseState::neel(8)?, &ki8, &assign_cones_mirrored(&ki8))?);
    out.push(check_sebd_order_vs_tebd("sebd_order_vs_tebd_n8", &MpsState::random(8, 4, 11)?, &ki8)?);

    let ki6 = build(&ModelParams::kicked_ising(6, j, h, 2.0))?;
    let sched = assign_cones(&ki6);
    let init = MpsState::neel(6)?;
    let z = ProjectionBasis::Fixed(Axis::Z);
    let x = ProjectionBasis::Fixed(Axis::X);
    let one_point = |a, p| ObservableSpec::one_point(a, p);
    out.push(check_enumeration("enumeration_em_z", &init, &ki6, &sched, z, vec![one_point(Axis::X, Protocol::Em), one_point(Axis::Z, Protocol::Em)])?);
    out.push(check_enumeration("enumeration_em_x", &init, &ki6, &sched, x, vec![one_point(Axis::X, Protocol::Em), one_point(Axis::Z, Protocol::Em)])?);
    out.push(check_enumeration("enumeration_bitstring_x", &init, &ki6, &sched, x, vec![one_point(Axis::X, Protocol::Bitstring)])?);
    out.push(check_enumeration("enumeration_rdm", &init, &ki6, &sched, ProjectionBasis::Rdm, vec![one_point(Axis::X, Protocol::Rdm)])?);
    for r in [0, 2] {
        out.push(check_enumeration(
            &format!("enumeration_equal_time_ref{}", r + 1),
            &init,
            &ki6,
            &sched,
            z,
            vec![
                ObservableSpec::equal_time(Axis::X, Axis::X, r, Protocol::Em),
                ObservableSpec::equal_time(Axis::Z, Axis::Z, r, Protocol::Em),
            ],
        )?);
    }
    out.push(check_enumeration(
        "enumeration_unequal_time",
        &MpsState::random(6, 3, 5)?,
        &ki6,
        &sched,
        z,
        vec![ObservableSpec::unequal_time(Axis::Z, Axis::Z, 2)],
    )?);
    Ok(out)
}
