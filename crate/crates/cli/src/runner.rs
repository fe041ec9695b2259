//! Deterministic parallel trajectory farming.
//!
//! Trajectory indices are cut into fixed blocks of [`BLOCK_SIZE`]. Workers
//! take whole blocks, each block accumulates its trajectories in index order,
//! and the finished blocks are merged left to right. Because neither the block
//! boundaries nor the merge order depend on the pool, aggregated output is
//! byte-identical for any worker count.

use std::{collections::BTreeMap, ops::Range};

use rayon::prelude::*;
use sebd_core::{
    engine::{run_sebd_trajectory, run_tebd_with_suite, snapshot_steps, ProfileStage},
    schedule::assign_cones,
    EngineKind, EstimatorAccumulator, EstimatorSuite, LightConeSchedule, SiteMoments, TrajectoryRecord,
};
use serde::Serialize;

use crate::{
    config::RunConfig,
    error::{CliError, Result},
    output,
};

pub const BLOCK_SIZE: usize = 64;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index`, a function of `(master_seed, index)` only.
pub fn trajectory_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ index)
}

/// One line of the estimator table. Sites and bonds are 1-based.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub time: f64,
    pub site_or_bond: Option<usize>,
    pub quantity: String,
    pub mean: f64,
    pub variance: Option<f64>,
    pub stderr: Option<f64>,
    pub n_samples: u64,
}

/// One line of the profile table. For SEBD each bond is reported at the cone
/// that finalizes the site on its left, averaged over trajectories.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileRow {
    pub time: f64,
    pub bond: usize,
    pub entropy_pre: f64,
    pub entropy_post: Option<f64>,
    pub chi_pre: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOutput {
    pub estimates: Vec<EstimateRow>,
    pub profiles: Vec<ProfileRow>,
    /// Merged per-site statistics of every SEBD estimator, by output time.
    pub accumulators: Vec<(f64, BTreeMap<String, EstimatorAccumulator>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub trajectories: usize,
    pub estimate_rows: usize,
    pub profile_rows: usize,
}

/// Partial statistics of a contiguous range of trajectories.
#[derive(Clone, Debug, PartialEq)]
struct Partial {
    estimates: BTreeMap<String, EstimatorAccumulator>,
    peak_entropy: SiteMoments,
    peak_chi: SiteMoments,
    entropy_pre: EstimatorAccumulator,
    entropy_post: EstimatorAccumulator,
    chi_pre: EstimatorAccumulator,
}

impl Partial {
    fn new(suite: &EstimatorSuite) -> Self {
        let n = suite.n_sites();
        let bonds = n.saturating_sub(1);
        Self {
            estimates: suite.labels().into_iter().map(|l| (l, EstimatorAccumulator::new(n))).collect(),
            peak_entropy: SiteMoments::default(),
            peak_chi: SiteMoments::default(),
            entropy_pre: EstimatorAccumulator::new(bonds),
            entropy_post: EstimatorAccumulator::new(bonds),
            chi_pre: EstimatorAccumulator::new(bonds),
        }
    }

    fn push(&mut self, record: &TrajectoryRecord, schedule: &LightConeSchedule) -> Result<()> {
        for (label, values) in &record.estimates {
            self.estimates.get_mut(label).expect("suite label").push(values)?;
        }
        self.peak_entropy.push(record.peak_entropy);
        self.peak_chi.push(record.peak_chi as f64);
        let bonds = self.entropy_pre.n_sites();
        let mut pre = vec![None; bonds];
        let mut post = vec![None; bonds];
        let mut chi = vec![None; bonds];
        for snap in &record.profiles {
            for &site in schedule.cones()[snap.cell].cell.iter().filter(|&&s| s < bonds) {
                match snap.stage {
                    ProfileStage::Pre => {
                        pre[site] = Some(snap.profile.entropies[site]);
                        chi[site] = Some(snap.profile.bond_dims[site] as f64);
                    }
                    ProfileStage::Post => post[site] = Some(snap.profile.entropies[site]),
                }
            }
        }
        self.entropy_pre.push(&pre)?;
        self.entropy_post.push(&post)?;
        self.chi_pre.push(&chi)?;
        Ok(())
    }

    fn merge(&self, other: &Self) -> Result<Self> {
        let mut estimates = BTreeMap::new();
        for (label, acc) in &self.estimates {
            estimates.insert(label.clone(), acc.merge(&other.estimates[label])?);
        }
        Ok(Self {
            estimates,
            peak_entropy: self.peak_entropy.merge(&other.peak_entropy),
            peak_chi: self.peak_chi.merge(&other.peak_chi),
            entropy_pre: self.entropy_pre.merge(&other.entropy_pre)?,
            entropy_post: self.entropy_post.merge(&other.entropy_post)?,
            chi_pre: self.chi_pre.merge(&other.chi_pre)?,
        })
    }

    fn rows(&self, time: f64, out: &mut RunOutput) {
        for (label, acc) in &self.estimates {
            for (s, m) in acc.sites().iter().enumerate().filter(|(_, m)| m.count > 0) {
                out.estimates.push(moment_row(time, Some(s + 1), label, m));
            }
        }
        out.accumulators.push((time, self.estimates.clone()));
        out.estimates.push(moment_row(time, None, "peak_entropy", &self.peak_entropy));
        out.estimates.push(moment_row(time, None, "peak_chi", &self.peak_chi));
        for b in 0..self.entropy_pre.n_sites() {
            if let (Some(pre), Some(chi)) = (self.entropy_pre.mean(b), self.chi_pre.mean(b)) {
                out.profiles.push(ProfileRow {
                    time,
                    bond: b + 1,
                    entropy_pre: pre,
                    entropy_post: self.entropy_post.mean(b),
                    chi_pre: chi,
                });
            }
        }
    }
}

fn moment_row(time: f64, site: Option<usize>, quantity: &str, m: &SiteMoments) -> EstimateRow {
    EstimateRow {
        time,
        site_or_bond: site,
        quantity: quantity.to_string(),
        mean: m.mean,
        variance: m.variance(),
        stderr: m.stderr(),
        n_samples: m.count,
    }
}

fn exact_row(time: f64, site: Option<usize>, quantity: &str, value: f64) -> EstimateRow {
    EstimateRow {
        time,
        site_or_bond: site,
        quantity: quantity.to_string(),
        mean: value,
        variance: Some(0.0),
        stderr: Some(0.0),
        n_samples: 1,
    }
}

fn blocks(n_samples: usize) -> Vec<Range<usize>> {
    (0..n_samples).step_by(BLOCK_SIZE).map(|s| s..(s + BLOCK_SIZE).min(n_samples)).collect()
}

/// Computes every table of a run without touching the filesystem.
pub fn compute(config: &RunConfig) -> Result<RunOutput> {
    match config.engine.engine {
        EngineKind::Tebd => compute_tebd(config),
        EngineKind::Sebd => compute_sebd(config),
    }
}

fn compute_tebd(config: &RunConfig) -> Result<RunOutput> {
    let circuit = config.circuit()?;
    let suite = config.suite()?;
    let mut engine = config.engine.clone();
    engine.snapshot_times = config.times.clone();
    let initial = config.initial.build(config.model.n_sites)?;
    let (_, diag) = run_tebd_with_suite(initial, &circuit, &engine, &suite)?;
    let mut out = RunOutput::default();
    for snap in &diag.snapshots {
        for (label, values) in &snap.estimates {
            for (s, v) in values.iter().enumerate() {
                if let Some(v) = v {
                    out.estimates.push(exact_row(snap.time, Some(s + 1), label, *v));
                }
            }
        }
        out.estimates.push(exact_row(snap.time, None, "peak_entropy", snap.profile.peak_entropy()));
        out.estimates.push(exact_row(snap.time, None, "peak_chi", snap.profile.peak_chi() as f64));
        for (b, (&s, &chi)) in snap.profile.entropies.iter().zip(&snap.profile.bond_dims).enumerate() {
            out.profiles.push(ProfileRow { time: snap.time, bond: b + 1, entropy_pre: s, entropy_post: None, chi_pre: chi as f64 });
        }
    }
    Ok(out)
}

fn compute_sebd(config: &RunConfig) -> Result<RunOutput> {
    let full = config.circuit()?;
    let suite = config.suite()?;
    let initial = config.initial.build(config.model.n_sites)?;
    let mut engine = config.engine.clone();
    engine.record_profiles = true;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} workers: {e}", config.worker_count)))?;
    let mut out = RunOutput::default();
    for &time in &config.times {
        let steps = snapshot_steps(&[time], &full)?[0];
        let schedule = assign_cones(&full.truncated(steps)?);
        let partials: Vec<Result<Partial>> = pool.install(|| {
            blocks(config.n_samples)
                .into_par_iter()
                .map(|range| {
                    let mut partial = Partial::new(&suite);
                    for index in range {
                        let seed = trajectory_seed(config.master_seed, index as u64);
                        let record = run_sebd_trajectory(&initial, &schedule, &engine, &suite, seed)?;
                        partial.push(&record, &schedule)?;
                    }
                    Ok(partial)
                })
                .collect()
        });
        let mut total = Partial::new(&suite);
        for p in partials {
            total = total.merge(&p?)?;
        }
        total.rows(time, &mut out);
    }
    Ok(out)
}

/// Validates output paths, computes, and writes both tables.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    let profiles_path = config.profiles_path();
    for path in [&config.output_path, &profiles_path] {
        std::fs::File::create(path).map_err(|source| CliError::Io { path: path.clone(), source })?;
    }
    let out = compute(config)?;
    output::write_estimates(&config.output_path, config.output_format, &out.estimates)?;
    output::write_profiles(&profiles_path, config.output_format, &out.profiles)?;
    let trajectories = match config.engine.engine {
        EngineKind::Tebd => 1,
        EngineKind::Sebd => config.n_samples * config.times.len(),
    };
    Ok(RunSummary { trajectories, estimate_rows: out.estimates.len(), profile_rows: out.profiles.len() })
}
