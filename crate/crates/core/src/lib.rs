//! Simulator and verification harness for a regularized stochastic
//! chemotaxis–fluid system on rectangular boxes.

pub mod config;
pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod noise;
pub mod ops;
pub mod report;
pub mod stepper;
pub mod verify;

pub use config::{parse_config, Config, Setup};
pub use diagnostics::{DiagnosticsRecord, DiagnosticsSettings, DiagnosticsStream, EnergyConstants};
pub use ensemble::{run_ensemble, EnsembleOptions, EnsembleResult};
pub use error::{Result, ScnsError};
pub use grid::{integrate, lp_norm, Bc, BoundarySpec, Grid, ScalarField, VectorField};
pub use model::{Kinetics, ModelParams, NoiseCoefficients};
pub use noise::{JumpSpec, NoiseDraw, NoiseSampler, RngStream};
pub use ops::OperatorWorkspace;
pub use stepper::{run, step, RunOutput, RunSettings, State, StepConfig};
