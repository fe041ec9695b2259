//! Matrix-product-state simulation of one-dimensional spin-1/2 chains.
//!
//! The crate provides brickwork circuit construction, time-evolving block
//! decimation, light-cone scheduling with projective measurements, several
//! estimator protocols and a dense state-vector oracle for small chains.

pub mod circuit;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod mps;
pub mod operators;
pub mod oracle;
pub mod schedule;
pub mod stats;
pub mod tensor;

pub use error::{Error, Result};
pub use mps::{EntanglementProfile, MpsState, OneBodyRdm, OutcomeChooser, RngChooser, Spin, TruncationReport};
pub use operators::{eigenbasis, eigenvalue, Axis, Basis, Gate2, Op1};
pub use tensor::{DenseTensor, SvdResult, TruncationBound, TruncationPolicy};
pub use circuit::{BrickworkCircuit, GateId, Layer, Model, ModelParams, Parity};
pub use engine::{EngineConfig, EngineKind, ProjectionBasis, TebdDiagnostics, TrajectoryRecord};
pub use estimators::{EstimateMap, EstimatorSuite, ObservableKind, ObservableSpec, Protocol};
pub use schedule::{Cone, Direction, LightConeSchedule, ScheduledGate};
pub use stats::{EstimatorAccumulator, SiteMoments};
