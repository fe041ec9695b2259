//! Flat `key = value` configuration with layered overrides.
//!
//! Sources are applied in order: built-in defaults, a config file, the
//! `SEBD_WORKERS` environment variable, then command-line flags. Keys accept
//! either `-` or `_` as a separator. Site indices in observable specs are
//! 1-based.

use std::{collections::BTreeMap, path::PathBuf, str::FromStr};

use sebd_core::{
    circuit::{build, Model},
    engine::snapshot_steps,
    BrickworkCircuit, EngineConfig, EngineKind, EstimatorSuite, ModelParams, MpsState, ObservableSpec, ProjectionBasis,
    TruncationPolicy,
};

use crate::error::{CliError, Result};

pub const WORKERS_ENV: &str = "SEBD_WORKERS";

const KEYS: &[&str] = &[
    "model",
    "n",
    "time",
    "times",
    "dt",
    "j",
    "h",
    "epsilon",
    "chi-max",
    "engine",
    "basis",
    "observables",
    "samples",
    "seed",
    "workers",
    "output",
    "format",
    "initial",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(CliError::Config(format!("unknown output format '{s}'"))),
        }
    }
}

/// Initial wavefunction of every trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialState {
    Neel,
    /// Random MPS of the given bond dimension, fixed by its own seed.
    Random { chi: usize, seed: u64 },
}

impl InitialState {
    pub fn build(self, n_sites: usize) -> sebd_core::Result<MpsState> {
        match self {
            InitialState::Neel => MpsState::neel(n_sites),
            InitialState::Random { chi, seed } => MpsState::random(n_sites, chi, seed),
        }
    }
}

impl FromStr for InitialState {
    type Err = CliError;

    /// `neel` or `random:<chi>:<seed>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || CliError::Config(format!("initial state '{s}' is not 'neel' or 'random:<chi>:<seed>'"));
        if s == "neel" {
            return Ok(InitialState::Neel);
        }
        let mut parts = s.split(':');
        match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some("random"), Some(chi), Some(seed), None) => {
                let chi = chi.parse().map_err(|_| bad())?;
                if chi == 0 {
                    return Err(bad());
                }
                Ok(InitialState::Random { chi, seed: seed.parse().map_err(|_| bad())? })
            }
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelParams,
    pub initial: InitialState,
    pub engine: EngineConfig,
    pub observables: Vec<ObservableSpec>,
    /// Output times in increasing order; the last one equals `model.t_final`.
    pub times: Vec<f64>,
    pub n_samples: usize,
    pub master_seed: u64,
    pub worker_count: usize,
    pub output_path: PathBuf,
    pub output_format: Format,
}

/// Raw key/value layer before validation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigMap(BTreeMap<String, String>);

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

impl ConfigMap {
    pub fn defaults() -> Self {
        let mut m = Self::default();
        for (k, v) in [
            ("model", "kicked-ising"),
            ("n", "16"),
            ("time", "4"),
            ("j", "0.39269908169872414"),
            ("h", "0.2"),
            ("epsilon", "1e-8"),
            ("chi-max", "none"),
            ("engine", "sebd"),
            ("basis", "z"),
            ("observables", "sz"),
            ("samples", "100"),
            ("seed", "0"),
            ("workers", "1"),
            ("output", "sebd_output.csv"),
            ("format", "csv"),
            ("initial", "neel"),
        ] {
            m.0.insert(k.into(), v.into());
        }
        m
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(&normalize_key(key)).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize_key(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Config(format!("unknown configuration key '{key}'")));
        }
        self.0.insert(key, value.trim().to_string());
        Ok(())
    }

    /// Lines of `key = value`; `#` starts a comment, blank lines are skipped.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected 'key = value'", lineno + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &std::path::Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        self.merge_text(&text)
    }

    pub fn merge_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(WORKERS_ENV) {
            self.set("workers", &v)?;
        }
        Ok(())
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.get(key).ok_or_else(|| CliError::Config(format!("missing '{key}'")))?;
        raw.parse().map_err(|_| CliError::Config(format!("invalid value '{raw}' for '{key}'")))
    }

    pub fn into_config(self) -> Result<RunConfig> {
        let n: usize = self.parse("n")?;
        let model = match self.get("model").unwrap_or_default() {
            "kicked-ising" | "kicked_ising" | "ising" => {
                let dt = self.get("dt").map(|_| self.parse("dt")).transpose()?.unwrap_or(1.0);
                let mut m = ModelParams::kicked_ising(n, self.parse("j")?, self.parse("h")?, 0.0);
                m.dt = dt;
                m
            }
            "heisenberg" => ModelParams::heisenberg(n, self.get("dt").map(|_| self.parse("dt")).transpose()?.unwrap_or(0.1), 0.0),
            other => return Err(CliError::Config(format!("unknown model '{other}'"))),
        };
        let times: Vec<f64> = match self.get("times") {
            Some(list) if !list.is_empty() => list
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| CliError::Config(format!("invalid time '{t}' in 'times'"))))
                .collect::<Result<_>>()?,
            _ => vec![self.parse("time")?],
        };
        let epsilon: f64 = self.parse("epsilon")?;
        let chi_max = match self.get("chi-max").unwrap_or("none") {
            "none" | "inf" | "" => None,
            _ => Some(self.parse::<usize>("chi-max")?),
        };
        let policy = TruncationPolicy::new(epsilon, chi_max).map_err(|e| CliError::Config(e.to_string()))?;
        let basis: ProjectionBasis =
            self.get("basis").unwrap_or("z").parse().map_err(|e: sebd_core::Error| CliError::Config(e.to_string()))?;
        let engine = match self.get("engine").unwrap_or_default() {
            "tebd" => EngineConfig { projection_basis: basis, ..EngineConfig::tebd(policy) },
            "sebd" => EngineConfig::sebd(policy, basis),
            other => return Err(CliError::Config(format!("unknown engine '{other}'"))),
        };
        let observables = self
            .get("observables")
            .unwrap_or_default()
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<ObservableSpec>().map_err(|e| CliError::Config(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        let config = RunConfig {
            model,
            initial: self.get("initial").unwrap_or("neel").parse()?,
            engine,
            observables,
            times,
            n_samples: self.parse("samples")?,
            master_seed: self.parse("seed")?,
            worker_count: self.parse("workers")?,
            output_path: PathBuf::from(self.get("output").unwrap_or_default()),
            output_format: self.get("format").unwrap_or("csv").parse()?,
        };
        config.validated()
    }
}

impl RunConfig {
    /// Normalizes `times` and checks that every component can be built.
    fn validated(mut self) -> Result<Self> {
        let cfg = |e: sebd_core::Error| CliError::Config(e.to_string());
        if self.n_samples == 0 {
            return Err(CliError::Config("samples must be at least 1".into()));
        }
        if self.worker_count == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        if self.output_path.as_os_str().is_empty() {
            return Err(CliError::Config("output path is empty".into()));
        }
        if self.times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(CliError::Config("times must be finite and non-negative".into()));
        }
        self.times.sort_by(f64::total_cmp);
        self.times.dedup();
        self.model.t_final = *self.times.last().expect("at least one time");
        let circuit = build(&self.model).map_err(cfg)?;
        snapshot_steps(&self.times, &circuit).map_err(cfg)?;
        self.suite().map_err(cfg)?;
        if let InitialState::Random { chi, .. } = self.initial {
            if chi == 0 {
                return Err(CliError::Config("random initial state needs chi >= 1".into()));
            }
        }
        if self.engine.engine == EngineKind::Sebd && self.model.n_sites < 2 {
            return Err(CliError::Config("SEBD needs at least two sites".into()));
        }
        Ok(self)
    }

    pub fn suite(&self) -> sebd_core::Result<EstimatorSuite> {
        EstimatorSuite::new(self.observables.clone(), self.model.n_sites, self.engine.projection_basis)
    }

    pub fn circuit(&self) -> sebd_core::Result<BrickworkCircuit> {
        build(&self.model)
    }

    pub fn is_kicked_ising(&self) -> bool {
        matches!(self.model.model, Model::KickedIsing { .. })
    }

    /// Companion path for the entanglement profile table.
    pub fn profiles_path(&self) -> PathBuf {
        let stem = self.output_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        self.output_path.with_file_name(format!("{stem}.profiles.{}", self.output_format.extension()))
    }
}
