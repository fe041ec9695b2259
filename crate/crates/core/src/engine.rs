//! Evolution drivers.
//!
//! TEBD applies the circuit layer by layer. SEBD applies it cone by cone and
//! after each cone evaluates the estimators of the freshly finalized cell,
//! then projects that cell site by site (left site first) and moves on.
//! Measured sites stay in the chain as bond-dimension-1 factors.

use std::fmt;

use num_complex::Complex64 as C64;
use rand_chacha::{rand_core::SeedableRng, ChaCha8Rng};
use serde::Serialize;

use crate::{
    circuit::BrickworkCircuit,
    error::{Error, Result},
    estimators::{EstimateMap, EstimatorSuite},
    mps::{EntanglementProfile, MpsState, OutcomeChooser, RngChooser},
    operators::{eigenbasis, Axis, Basis},
    schedule::LightConeSchedule,
    tensor::{TruncationBound, TruncationPolicy},
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Tebd,
    Sebd,
}

/// Basis in which SEBD collapses finalized sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProjectionBasis {
    /// Eigenbasis of `S^α`, `+1/2` outcome first.
    Fixed(Axis),
    /// Eigenbasis of the site's reduced density matrix at projection time.
    Rdm,
}

impl fmt::Display for ProjectionBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProjectionBasis::Fixed(a) => write!(f, "{}", a.as_char()),
            ProjectionBasis::Rdm => write!(f, "rdm"),
        }
    }
}

impl std::str::FromStr for ProjectionBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "rdm" {
            return Ok(ProjectionBasis::Rdm);
        }
        let mut chars = s.chars();
        match (chars.next().and_then(Axis::from_char), chars.next()) {
            (Some(a), None) => Ok(ProjectionBasis::Fixed(a)),
            _ => Err(Error::Parse(format!("unknown projection basis '{s}'"))),
        }
    }
}

impl Serialize for ProjectionBasis {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    pub engine: EngineKind,
    pub policy: TruncationPolicy,
    pub projection_basis: ProjectionBasis,
    /// Keep every pre/post profile in SEBD records. Peaks are always kept.
    pub record_profiles: bool,
    /// TEBD snapshot times; empty means the final time only.
    pub snapshot_times: Vec<f64>,
}

impl EngineConfig {
    pub fn tebd(policy: TruncationPolicy) -> Self {
        Self {
            engine: EngineKind::Tebd,
            policy,
            projection_basis: ProjectionBasis::Fixed(Axis::Z),
            record_profiles: false,
            snapshot_times: Vec::new(),
        }
    }

    pub fn sebd(policy: TruncationPolicy, projection_basis: ProjectionBasis) -> Self {
        Self { engine: EngineKind::Sebd, policy, projection_basis, record_profiles: false, snapshot_times: Vec::new() }
    }

    fn require(&self, kind: EngineKind) -> Result<()> {
        if self.engine != kind {
            return Err(Error::Contract(format!("engine configured as {:?}, called as {kind:?}", self.engine)));
        }
        Ok(())
    }
}

/// Running totals over all truncations of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct TruncationTally {
    pub max_discarded_weight: f64,
    pub total_discarded_weight: f64,
    pub epsilon_bound: u64,
    pub chi_max_bound: u64,
}

impl TruncationTally {
    fn add(&mut self, discarded: f64, bound: TruncationBound) {
        self.max_discarded_weight = self.max_discarded_weight.max(discarded);
        self.total_discarded_weight += discarded;
        match bound {
            TruncationBound::Epsilon => self.epsilon_bound += 1,
            TruncationBound::ChiMax => self.chi_max_bound += 1,
            TruncationBound::None => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TebdSnapshot {
    pub time: f64,
    pub profile: EntanglementProfile,
    pub estimates: EstimateMap,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TebdDiagnostics {
    pub snapshots: Vec<TebdSnapshot>,
    pub truncation: TruncationTally,
}

/// Validated snapshot steps, sorted and deduplicated.
pub fn snapshot_steps(times: &[f64], circuit: &BrickworkCircuit) -> Result<Vec<usize>> {
    if times.is_empty() {
        return Ok(vec![circuit.steps()]);
    }
    let dt = circuit.dt();
    let mut steps = Vec::with_capacity(times.len());
    for &t in times {
        let s = (t / dt).round();
        if !(t >= 0.0) || (s * dt - t).abs() > 1e-9 * t.max(1.0) || s as usize > circuit.steps() {
            return Err(Error::Contract(format!(
                "snapshot time {t} is not a multiple of dt = {dt} within [0, {}]",
                circuit.final_time()
            )));
        }
        steps.push(s as usize);
    }
    steps.sort_unstable();
    steps.dedup();
    Ok(steps)
}

/// Layer-ordered evolution without estimators.
pub fn run_tebd(state: MpsState, circuit: &BrickworkCircuit, config: &EngineConfig) -> Result<(MpsState, TebdDiagnostics)> {
    let suite = EstimatorSuite::empty(state.n_sites(), config.projection_basis);
    run_tebd_with_suite(state, circuit, config, &suite)
}

/// Layer-ordered evolution recording profiles and exact estimator targets at
/// each snapshot time.
pub fn run_tebd_with_suite(
    mut state: MpsState,
    circuit: &BrickworkCircuit,
    config: &EngineConfig,
    suite: &EstimatorSuite,
) -> Result<(MpsState, TebdDiagnostics)> {
    config.require(EngineKind::Tebd)?;
    check_sizes(state.n_sites(), circuit.n_sites())?;
    let steps = snapshot_steps(&config.snapshot_times, circuit)?;
    let mut copies = suite.initial_copies(&state)?;
    let mut tally = TruncationTally::default();
    let mut snapshots = Vec::with_capacity(steps.len());
    let mut record = |state: &mut MpsState, copies: &[MpsState], step: usize| -> Result<()> {
        snapshots.push(TebdSnapshot {
            time: step as f64 * circuit.dt(),
            profile: state.entanglement_profile()?,
            estimates: suite.exact_values(state, copies)?,
        });
        Ok(())
    };
    if steps.first() == Some(&0) {
        record(&mut state, &copies, 0)?;
    }
    for step in 0..circuit.steps() {
        for layer in &circuit.layers()[2 * step..2 * step + 2] {
            for (bond, gate) in &layer.gates {
                let r = state.apply_two_site_gate(*bond, gate, &config.policy)?;
                tally.add(r.discarded_weight, r.bound);
                for c in copies.iter_mut() {
                    c.apply_two_site_gate(*bond, gate, &config.policy)?;
                }
            }
        }
        if steps.binary_search(&(step + 1)).is_ok() {
            record(&mut state, &copies, step + 1)?;
        }
    }
    Ok((state, TebdDiagnostics { snapshots, truncation: tally }))
}

fn check_sizes(state: usize, other: usize) -> Result<()> {
    if state != other {
        return Err(Error::Shape(format!("{state}-site state with a {other}-site circuit")));
    }
    Ok(())
}

/// Applies every cone of `schedule` in order without measuring.
pub fn apply_schedule(state: &mut MpsState, schedule: &LightConeSchedule, policy: &TruncationPolicy) -> Result<TruncationTally> {
    check_sizes(state.n_sites(), schedule.n_sites())?;
    let mut tally = TruncationTally::default();
    for cone in schedule.cones() {
        for g in &cone.gates {
            let r = state.apply_two_site_gate(g.bond(), &g.gate, policy)?;
            tally.add(r.discarded_weight, r.bound);
        }
    }
    Ok(tally)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementEvent {
    pub site: usize,
    pub basis: ProjectionBasis,
    /// The state the site was projected onto.
    #[serde(skip)]
    pub vector: [C64; 2],
    pub outcome: usize,
    pub probability: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileStage {
    Pre,
    Post,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileSnapshot {
    pub cell: usize,
    pub stage: ProfileStage,
    pub profile: EntanglementProfile,
}

/// Everything one SEBD sample produces.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub measurements: Vec<MeasurementEvent>,
    pub estimates: EstimateMap,
    /// Empty unless profile recording is on.
    pub profiles: Vec<ProfileSnapshot>,
    /// Largest entropy over all pre-projection profiles.
    pub peak_entropy: f64,
    /// Largest bond dimension over all pre-projection profiles.
    pub peak_chi: usize,
    /// Product of all measurement probabilities.
    pub born_weight: f64,
    pub truncation: TruncationTally,
}

/// One Born-sampled SEBD trajectory with a ChaCha8 stream seeded by `seed`.
pub fn run_sebd_trajectory(
    initial: &MpsState,
    schedule: &LightConeSchedule,
    config: &EngineConfig,
    suite: &EstimatorSuite,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let mut chooser = RngChooser(ChaCha8Rng::seed_from_u64(seed));
    run_sebd_with_chooser(initial, schedule, config, suite, &mut chooser, seed)
}

/// SEBD trajectory with outcomes supplied by `chooser`. `seed` is only
/// recorded.
pub fn run_sebd_with_chooser(
    initial: &MpsState,
    schedule: &LightConeSchedule,
    config: &EngineConfig,
    suite: &EstimatorSuite,
    chooser: &mut dyn OutcomeChooser,
    seed: u64,
) -> Result<TrajectoryRecord> {
    config.require(EngineKind::Sebd)?;
    check_sizes(initial.n_sites(), schedule.n_sites())?;
    if suite.basis() != config.projection_basis {
        return Err(Error::Contract(format!(
            "suite built for the {} basis, engine projects in {}",
            suite.basis(),
            config.projection_basis
        )));
    }
    suite.check_schedule(schedule)?;
    let policy = &config.policy;
    let mut state = initial.clone();
    let mut copies = suite.initial_copies(initial)?;
    let mut estimates = suite.empty_values();
    let exempt = suite.exempt_cells(schedule);
    let mut record = TrajectoryRecord {
        seed,
        measurements: Vec::new(),
        estimates: EstimateMap::new(),
        profiles: Vec::new(),
        peak_entropy: 0.0,
        peak_chi: 1,
        born_weight: 1.0,
        truncation: TruncationTally::default(),
    };
    for (k, cone) in schedule.cones().iter().enumerate() {
        for g in &cone.gates {
            let r = state.apply_two_site_gate(g.bond(), &g.gate, policy)?;
            record.truncation.add(r.discarded_weight, r.bound);
            for c in copies.iter_mut() {
                c.apply_two_site_gate(g.bond(), &g.gate, policy)?;
            }
        }
        let pre = state.compressed_profile(policy)?;
        record.peak_entropy = record.peak_entropy.max(pre.peak_entropy());
        record.peak_chi = record.peak_chi.max(pre.peak_chi());
        if config.record_profiles {
            record.profiles.push(ProfileSnapshot { cell: k, stage: ProfileStage::Pre, profile: pre });
        }

        suite.evaluate_cell(schedule, k, &state, &copies, &mut estimates)?;

        if !exempt[k] {
            for &site in &cone.cell {
                let basis: Basis = match config.projection_basis {
                    ProjectionBasis::Fixed(a) => eigenbasis(a),
                    ProjectionBasis::Rdm => state.one_body_rdm(site)?.eigenvectors,
                };
                let (outcome, p) = state.measure_site(site, &basis, chooser)?;
                for c in copies.iter_mut() {
                    c.project_site_with_reference(site, basis[outcome], p)?;
                }
                record.born_weight *= p;
                record.measurements.push(MeasurementEvent {
                    site,
                    basis: config.projection_basis,
                    vector: basis[outcome],
                    outcome,
                    probability: p,
                });
            }
        }
        if config.record_profiles {
            let post = state.compressed_profile(policy)?;
            record.profiles.push(ProfileSnapshot { cell: k, stage: ProfileStage::Post, profile: post });
        }
    }
    suite.evaluate_bitstrings(schedule, &record.measurements, &mut estimates)?;
    record.estimates = estimates;
    Ok(record)
}

/// Trajectory-averaged peaks at one final time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeakAverage {
    pub time: f64,
    pub mean_peak_entropy: f64,
    pub mean_peak_chi: f64,
}

impl PeakAverage {
    pub fn from_records(time: f64, records: &[TrajectoryRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Contract("peak average over no trajectories".into()));
        }
        let n = records.len() as f64;
        Ok(Self {
            time,
            mean_peak_entropy: records.iter().map(|r| r.peak_entropy).sum::<f64>() / n,
            mean_peak_chi: records.iter().map(|r| r.peak_chi as f64).sum::<f64>() / n,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapPoint {
    pub time: f64,
    /// TEBD peak entropy minus mean SEBD peak entropy.
    pub delta_entropy: f64,
    /// TEBD peak bond dimension minus mean SEBD peak bond dimension.
    pub delta_chi: f64,
}

/// Per-time gaps between TEBD peaks and SEBD mean peaks. Every SEBD time
/// must match a TEBD snapshot.
pub fn entanglement_gap(sebd: &[PeakAverage], tebd: &TebdDiagnostics) -> Result<Vec<GapPoint>> {
    sebd.iter()
        .map(|s| {
            let snap = tebd
                .snapshots
                .iter()
                .find(|t| (t.time - s.time).abs() <= 1e-9)
                .ok_or_else(|| Error::Contract(format!("no TEBD snapshot at time {}", s.time)))?;
            Ok(GapPoint {
                time: s.time,
                delta_entropy: snap.profile.peak_entropy() - s.mean_peak_entropy,
                delta_chi: snap.profile.peak_chi() as f64 - s.mean_peak_chi,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{
        circuit::{build, ModelParams},
        estimators::{ObservableSpec, Protocol},
        schedule::assign_cones,
    };

    #[test]
    fn depth_zero_trajectory_reproduces_product() {
        let c = build(&ModelParams::kicked_ising(4, 0.3, 0.2, 0.0)).unwrap();
        let s = assign_cones(&c);
        let init = MpsState::neel(4).unwrap();
        let cfg = EngineConfig::sebd(TruncationPolicy::exact(), ProjectionBasis::Fixed(Axis::Z));
        let suite = EstimatorSuite::new(
            vec![ObservableSpec::one_point(Axis::Z, Protocol::Bitstring)],
            4,
            cfg.projection_basis,
        )
        .unwrap();
        let rec = run_sebd_trajectory(&init, &s, &cfg, &suite, 1).unwrap();
        assert_eq!(rec.born_weight, 1.0);
        let outcomes: Vec<usize> = rec.measurements.iter().map(|m| m.outcome).collect();
        assert_eq!(outcomes, vec![0, 1, 0, 1]);
        assert_eq!(rec.estimates["sz:bitstring"], vec![Some(0.5), Some(-0.5), Some(0.5), Some(-0.5)]);
    }

    #[test]
    fn identity_circuit_leaves_state() {
        let init = MpsState::random(6, 4, 2).unwrap();
        let c = BrickworkCircuit::uniform(6, 1.0, 3, crate::operators::Gate2::identity()).unwrap();
        let (out, diag) = run_tebd(init.clone(), &c, &EngineConfig::tebd(TruncationPolicy::exact())).unwrap();
        let a = init.to_state_vector().unwrap();
        let b = out.to_state_vector().unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() < 1e-12));
        assert_eq!(diag.snapshots.len(), 1);
    }

    #[test]
    fn wrong_engine_kind_is_rejected() {
        let c = build(&ModelParams::kicked_ising(4, 0.3, 0.2, 1.0)).unwrap();
        let cfg = EngineConfig::sebd(TruncationPolicy::exact(), ProjectionBasis::Fixed(Axis::Z));
        assert!(run_tebd(MpsState::neel(4).unwrap(), &c, &cfg).is_err());
    }

    #[test]
    fn snapshot_time_validation() {
        let c = build(&ModelParams::heisenberg(4, 0.1, 1.0)).unwrap();
        assert_eq!(snapshot_steps(&[0.5, 0.2, 0.5], &c).unwrap(), vec![2, 5]);
        assert!(snapshot_steps(&[0.25], &c).is_err());
        assert!(snapshot_steps(&[1.1], &c).is_err());
    }

    #[test]
    fn equal_inputs_give_zero_gap() {
        let c = build(&ModelParams::kicked_ising(6, 0.3, 0.2, 2.0)).unwrap();
        let mut cfg = EngineConfig::tebd(TruncationPolicy::exact());
        cfg.snapshot_times = vec![1.0, 2.0];
        let (_, diag) = run_tebd(MpsState::neel(6).unwrap(), &c, &cfg).unwrap();
        let same: Vec<PeakAverage> = diag
            .snapshots
            .iter()
            .map(|s| PeakAverage {
                time: s.time,
                mean_peak_entropy: s.profile.peak_entropy(),
                mean_peak_chi: s.profile.peak_chi() as f64,
            })
            .collect();
        let gap = entanglement_gap(&same, &diag).unwrap();
        assert!(gap.iter().all(|g| g.delta_entropy == 0.0 && g.delta_chi == 0.0));
        let off = [PeakAverage { time: 1.5, mean_peak_entropy: 0.0, mean_peak_chi: 1.0 }];
        assert!(entanglement_gap(&off, &diag).is_err());
    }

    #[test]
    fn basis_parsing() {
        assert_eq!("x".parse::<ProjectionBasis>().unwrap(), ProjectionBasis::Fixed(Axis::X));
        assert_eq!("rdm".parse::<ProjectionBasis>().unwrap(), ProjectionBasis::Rdm);
        assert!("xy".parse::<ProjectionBasis>().is_err());
    }
}
