//! Observable protocols evaluated along SEBD trajectories.
//!
//! Three ways of estimating a one-point function `⟨S^α_ℓ⟩` are supported:
//! entangled measurement (EM) reads the expectation value off the state just
//! before the cell is projected, bitstring sampling uses the `±1/2`
//! eigenvalue of the projective outcome, and the RDM protocol evaluates
//! `tr[ρ S^α]` while projecting in the eigenbasis of `ρ`.
//!
//! Equal-time correlators `⟨S^α_ℓ S^β_ℓ'⟩` keep the cell holding the
//! reference site `ℓ` unprojected for the whole trajectory and evaluate the
//! correlator for every later cell before it is projected. Unequal-time
//! correlators `⟨S^α_ℓ(t) S^β_ℓ'(0)⟩` carry a second copy
//! `S^β_ℓ'|Ψ₀⟩` through the same gates. Copy 2 is projected onto copy 1's
//! outcome and divided by `√p` with `p` copy 1's Born probability, so that
//! `Σ_m p_m ⟨Ψ_m|S^α_ℓ|Ψ'_m⟩` equals the correlator exactly.
//!
//! Sites in the text grammar are 1-based; everything else is 0-based.

use std::{collections::BTreeMap, fmt, str::FromStr};

use num_complex::Complex64 as C64;

use crate::{
    engine::{EngineConfig, MeasurementEvent, ProjectionBasis},
    error::{Error, Result},
    mps::MpsState,
    operators::{eigenvalue, Axis, Op1},
    schedule::LightConeSchedule,
};

/// Per-site values of every estimator in a suite, keyed by label.
pub type EstimateMap = BTreeMap<String, Vec<Option<f64>>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Protocol {
    Em,
    Bitstring,
    Rdm,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Em => "em",
            Protocol::Bitstring => "bitstring",
            Protocol::Rdm => "rdm",
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "em" => Ok(Protocol::Em),
            "bitstring" => Ok(Protocol::Bitstring),
            "rdm" => Ok(Protocol::Rdm),
            other => Err(Error::Parse(format!("unknown protocol '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ObservableKind {
    OnePoint,
    /// `⟨S^α_reference S^β_ℓ⟩` at the final time.
    EqualTime { reference: usize, beta: Axis },
    /// `⟨S^α_ℓ(t) S^β_reference(0)⟩`.
    UnequalTime { reference: usize, beta: Axis },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ObservableSpec {
    pub kind: ObservableKind,
    pub alpha: Axis,
    pub protocol: Protocol,
}

impl ObservableSpec {
    pub fn one_point(alpha: Axis, protocol: Protocol) -> Self {
        Self { kind: ObservableKind::OnePoint, alpha, protocol }
    }

    pub fn equal_time(alpha: Axis, beta: Axis, reference: usize, protocol: Protocol) -> Self {
        Self { kind: ObservableKind::EqualTime { reference, beta }, alpha, protocol }
    }

    pub fn unequal_time(alpha: Axis, beta: Axis, reference: usize) -> Self {
        Self { kind: ObservableKind::UnequalTime { reference, beta }, alpha, protocol: Protocol::Em }
    }

    pub fn reference(&self) -> Option<usize> {
        match self.kind {
            ObservableKind::OnePoint => None,
            ObservableKind::EqualTime { reference, .. } | ObservableKind::UnequalTime { reference, .. } => Some(reference),
        }
    }

    /// Output labels: one per real-valued series.
    pub fn labels(&self) -> Vec<String> {
        let base = self.to_string();
        match self.kind {
            ObservableKind::UnequalTime { .. } => vec![format!("{base}:re"), format!("{base}:im")],
            _ => vec![base],
        }
    }
}

/// Canonical text form, e.g. `sx:em`, `czz@51:bitstring`, `uzx@50:em`.
impl fmt::Display for ObservableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = self.alpha.as_char();
        let p = self.protocol.as_str();
        match self.kind {
            ObservableKind::OnePoint => write!(f, "s{a}:{p}"),
            ObservableKind::EqualTime { reference, beta } => write!(f, "c{a}{}@{}:{p}", beta.as_char(), reference + 1),
            ObservableKind::UnequalTime { reference, beta } => write!(f, "u{a}{}@{}:{p}", beta.as_char(), reference + 1),
        }
    }
}

/// Parses `s<α>`, `c<α><β>@<site>` and `u<α><β>@<site>` with an optional
/// `:em`, `:bitstring` or `:rdm` suffix (default `em`). Sites are 1-based.
impl FromStr for ObservableSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("cannot parse observable '{text}'"));
        let (body, protocol) = match text.split_once(':') {
            Some((b, p)) => (b, p.parse()?),
            None => (text, Protocol::Em),
        };
        let mut chars = body.chars();
        let head = chars.next().ok_or_else(bad)?;
        let axis = |c: Option<char>| c.and_then(Axis::from_char).ok_or_else(bad);
        let alpha = axis(chars.next())?;
        if head == 's' {
            return if chars.next().is_none() { Ok(Self::one_point(alpha, protocol)) } else { Err(bad()) };
        }
        let beta = axis(chars.next())?;
        let rest: String = chars.collect();
        let site: usize = rest.strip_prefix('@').and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if site == 0 {
            return Err(Error::Parse(format!("sites are 1-based in '{text}'")));
        }
        match head {
            'c' => Ok(Self::equal_time(alpha, beta, site - 1, protocol)),
            'u' => Ok(Self { kind: ObservableKind::UnequalTime { reference: site - 1, beta }, alpha, protocol }),
            _ => Err(bad()),
        }
    }
}

/// A validated set of observables evaluated together on each trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorSuite {
    specs: Vec<ObservableSpec>,
    n_sites: usize,
    basis: ProjectionBasis,
}

impl EstimatorSuite {
    pub fn new(specs: Vec<ObservableSpec>, n_sites: usize, basis: ProjectionBasis) -> Result<Self> {
        for spec in &specs {
            if let Some(r) = spec.reference() {
                if r >= n_sites {
                    return Err(Error::Contract(format!("{spec}: reference outside a {n_sites}-site chain")));
                }
            }
            match (spec.protocol, spec.kind) {
                (Protocol::Em, _) => {}
                (_, ObservableKind::UnequalTime { .. }) => {
                    return Err(Error::Contract(format!("{spec}: unequal-time correlators need the em protocol")));
                }
                (Protocol::Bitstring, kind) => {
                    if basis != ProjectionBasis::Fixed(spec.alpha) {
                        return Err(Error::Contract(format!(
                            "{spec}: bitstring sampling needs the {} projection basis",
                            spec.alpha.as_char()
                        )));
                    }
                    if let ObservableKind::EqualTime { beta, .. } = kind {
                        if beta != spec.alpha {
                            return Err(Error::Contract(format!("{spec}: bitstring correlators need equal components")));
                        }
                    }
                }
                (Protocol::Rdm, ObservableKind::OnePoint) => {
                    if basis != ProjectionBasis::Rdm {
                        return Err(Error::Contract(format!("{spec}: rdm protocol needs the rdm projection basis")));
                    }
                }
                (Protocol::Rdm, _) => {
                    return Err(Error::Contract(format!("{spec}: rdm protocol applies to one-point functions only")));
                }
            }
        }
        Ok(Self { specs, n_sites, basis })
    }

    pub fn empty(n_sites: usize, basis: ProjectionBasis) -> Self {
        Self { specs: Vec::new(), n_sites, basis }
    }

    pub fn specs(&self) -> &[ObservableSpec] {
        &self.specs
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn basis(&self) -> ProjectionBasis {
        self.basis
    }

    pub fn labels(&self) -> Vec<String> {
        self.specs.iter().flat_map(ObservableSpec::labels).collect()
    }

    pub fn empty_values(&self) -> EstimateMap {
        self.labels().into_iter().map(|l| (l, vec![None; self.n_sites])).collect()
    }

    fn unequal(&self) -> impl Iterator<Item = (usize, Axis)> + '_ {
        self.specs.iter().filter_map(|s| match s.kind {
            ObservableKind::UnequalTime { reference, beta } => Some((reference, beta)),
            _ => None,
        })
    }

    /// Second copies `S^β_ref |Ψ₀⟩`, one per unequal-time observable, in
    /// suite order. The operator norm goes into each copy's amplitude.
    pub fn initial_copies(&self, initial: &MpsState) -> Result<Vec<MpsState>> {
        self.unequal()
            .map(|(reference, beta)| {
                let mut copy = initial.clone();
                copy.apply_single_site(reference, &Op1::spin(beta))?;
                Ok(copy)
            })
            .collect()
    }

    /// Cells that must stay unprojected: those holding the reference of an
    /// EM equal-time correlator.
    pub fn exempt_cells(&self, schedule: &LightConeSchedule) -> Vec<bool> {
        let mut exempt = vec![false; schedule.cell_count()];
        for spec in &self.specs {
            if let (ObservableKind::EqualTime { reference, .. }, Protocol::Em) = (spec.kind, spec.protocol) {
                if let Some(k) = schedule.cell_of(reference) {
                    exempt[k] = true;
                }
            }
        }
        exempt
    }

    /// Rejects combinations that cannot be evaluated on `schedule`.
    pub fn check_schedule(&self, schedule: &LightConeSchedule) -> Result<()> {
        if schedule.n_sites() != self.n_sites {
            return Err(Error::Shape(format!(
                "suite for {} sites, schedule for {}",
                self.n_sites,
                schedule.n_sites()
            )));
        }
        let exempt = self.exempt_cells(schedule);
        for spec in &self.specs {
            if let (ObservableKind::EqualTime { reference, .. }, Protocol::Bitstring) = (spec.kind, spec.protocol) {
                if schedule.cell_of(reference).is_some_and(|k| exempt[k]) {
                    return Err(Error::Contract(format!(
                        "{spec}: reference cell is kept unprojected by an em correlator"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Pre-projection estimators for cone `k` of `schedule`.
    pub fn evaluate_cell(
        &self,
        schedule: &LightConeSchedule,
        k: usize,
        state: &MpsState,
        copies: &[MpsState],
        values: &mut EstimateMap,
    ) -> Result<()> {
        let cell = &schedule.cones()[k].cell;
        let mut copy_index = 0;
        for spec in &self.specs {
            let labels = spec.labels();
            match (spec.kind, spec.protocol) {
                (ObservableKind::OnePoint, Protocol::Em) => {
                    let v = em_one_point(state, cell, spec.alpha)?;
                    let out = values.get_mut(&labels[0]).expect("label registered");
                    for (&s, x) in cell.iter().zip(v) {
                        out[s] = Some(x);
                    }
                }
                (ObservableKind::OnePoint, Protocol::Rdm) => {
                    for &s in cell {
                        let x = rdm_one_point(state, s, spec.alpha)?;
                        values.get_mut(&labels[0]).expect("label registered")[s] = Some(x);
                    }
                }
                (ObservableKind::EqualTime { reference, beta }, Protocol::Em) => {
                    if schedule.cell_of(reference).is_some_and(|r| k >= r) {
                        for &s in cell {
                            let x = equal_time_value(state, reference, spec.alpha, s, beta)?;
                            values.get_mut(&labels[0]).expect("label registered")[s] = Some(x);
                        }
                    }
                }
                (ObservableKind::UnequalTime { .. }, _) => {
                    let copy = &copies[copy_index];
                    copy_index += 1;
                    for &s in cell {
                        let z = MpsState::cross_expect(state, copy, s, &Op1::spin(spec.alpha))?;
                        values.get_mut(&labels[0]).expect("label registered")[s] = Some(z.re);
                        values.get_mut(&labels[1]).expect("label registered")[s] = Some(z.im);
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Bitstring estimators from the complete measurement record.
    pub fn evaluate_bitstrings(&self, schedule: &LightConeSchedule, record: &[MeasurementEvent], values: &mut EstimateMap) -> Result<()> {
        let mut outcome: Vec<Option<&MeasurementEvent>> = vec![None; self.n_sites];
        for e in record {
            outcome[e.site] = Some(e);
        }
        for spec in &self.specs {
            if spec.protocol != Protocol::Bitstring {
                continue;
            }
            let label = &spec.labels()[0];
            match spec.kind {
                ObservableKind::OnePoint => {
                    for (s, e) in outcome.iter().enumerate() {
                        if let Some(e) = e {
                            let x = bitstring_one_point(e.basis, e.outcome, spec.alpha)?;
                            values.get_mut(label).expect("label registered")[s] = Some(x);
                        }
                    }
                }
                ObservableKind::EqualTime { reference, .. } => {
                    let Some(r) = schedule.cell_of(reference) else { continue };
                    let Some(er) = outcome[reference] else { continue };
                    let xr = bitstring_one_point(er.basis, er.outcome, spec.alpha)?;
                    for cone in &schedule.cones()[r..] {
                        for &s in &cone.cell {
                            if let Some(e) = outcome[s] {
                                let x = bitstring_one_point(e.basis, e.outcome, spec.alpha)?;
                                values.get_mut(label).expect("label registered")[s] = Some(xr * x);
                            }
                        }
                    }
                }
                ObservableKind::UnequalTime { .. } => {}
            }
        }
        Ok(())
    }

    /// Exact values of every estimator's target quantity on a deterministic
    /// state, with `copies` evolved alongside it. Equal-time correlators are
    /// reported on every site.
    pub fn exact_values(&self, state: &MpsState, copies: &[MpsState]) -> Result<EstimateMap> {
        let mut values = self.empty_values();
        let mut copy_index = 0;
        for spec in &self.specs {
            let labels = spec.labels();
            for s in 0..self.n_sites {
                match spec.kind {
                    ObservableKind::OnePoint => {
                        let x = state.expect_local(s, &Op1::spin(spec.alpha))?;
                        values.get_mut(&labels[0]).expect("label registered")[s] = Some(x);
                    }
                    ObservableKind::EqualTime { reference, beta } => {
                        let x = equal_time_value(state, reference, spec.alpha, s, beta)?;
                        values.get_mut(&labels[0]).expect("label registered")[s] = Some(x);
                    }
                    ObservableKind::UnequalTime { .. } => {
                        let z = MpsState::cross_expect(state, &copies[copy_index], s, &Op1::spin(spec.alpha))?;
                        values.get_mut(&labels[0]).expect("label registered")[s] = Some(z.re);
                        values.get_mut(&labels[1]).expect("label registered")[s] = Some(z.im);
                    }
                }
            }
            if matches!(spec.kind, ObservableKind::UnequalTime { .. }) {
                copy_index += 1;
            }
        }
        Ok(values)
    }
}

fn equal_time_value(state: &MpsState, reference: usize, alpha: Axis, site: usize, beta: Axis) -> Result<f64> {
    let (a, b) = (Op1::spin(alpha), Op1::spin(beta));
    if reference == site {
        // S^α S^β is Hermitian only when the components agree; take the
        // symmetrized real part, which is what the product estimates.
        return Ok(state.expect_product(&[(site, a * b)])?.re);
    }
    state.expect_two_site(reference, &a, site, &b)
}

/// `⟨S^α⟩` on each site of `cell`, read off the unprojected state.
pub fn em_one_point(state: &MpsState, cell: &[usize], alpha: Axis) -> Result<Vec<f64>> {
    let op = Op1::spin(alpha);
    cell.iter().map(|&s| state.expect_local(s, &op)).collect()
}

/// `±1/2` eigenvalue for an outcome recorded in `basis`.
pub fn bitstring_one_point(basis: ProjectionBasis, outcome: usize, alpha: Axis) -> Result<f64> {
    if basis != ProjectionBasis::Fixed(alpha) {
        return Err(Error::Contract(format!(
            "bitstring estimate of S^{} from a {basis} measurement",
            alpha.as_char()
        )));
    }
    Ok(eigenvalue(outcome))
}

/// `tr[ρ S^α]` from the one-site reduced density matrix.
pub fn rdm_one_point(state: &MpsState, site: usize, alpha: Axis) -> Result<f64> {
    Ok(state.one_body_rdm(site)?.expectation(&Op1::spin(alpha)).re)
}

/// One EM trajectory of `⟨S^α_reference S^β_ℓ⟩` on every site reachable from
/// the reference cell in `schedule`'s scan direction.
pub fn equal_time_correlator_trajectory(
    initial: &MpsState,
    schedule: &LightConeSchedule,
    config: &EngineConfig,
    reference: usize,
    alpha: Axis,
    beta: Axis,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    let spec = ObservableSpec::equal_time(alpha, beta, reference, Protocol::Em);
    single_series(initial, schedule, config, spec, seed).map(|mut v| v.swap_remove(0))
}

/// One trajectory of `⟨S^α_ℓ(t) S^β_reference(0)⟩` per site, as complex values.
pub fn unequal_time_trajectory(
    initial: &MpsState,
    schedule: &LightConeSchedule,
    config: &EngineConfig,
    reference: usize,
    alpha: Axis,
    beta: Axis,
    seed: u64,
) -> Result<Vec<Option<C64>>> {
    let spec = ObservableSpec::unequal_time(alpha, beta, reference);
    let v = single_series(initial, schedule, config, spec, seed)?;
    Ok(v[0].iter().zip(&v[1]).map(|(re, im)| Some(C64::new((*re)?, (*im)?))).collect())
}

fn single_series(
    initial: &MpsState,
    schedule: &LightConeSchedule,
    config: &EngineConfig,
    spec: ObservableSpec,
    seed: u64,
) -> Result<Vec<Vec<Option<f64>>>> {
    let suite = EstimatorSuite::new(vec![spec], initial.n_sites(), config.projection_basis)?;
    let mut record = crate::engine::run_sebd_trajectory(initial, schedule, config, &suite, seed)?;
    Ok(spec.labels().iter().map(|l| record.estimates.remove(l).expect("label registered")).collect())
}
