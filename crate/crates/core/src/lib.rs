//! Extremum seeking boundary control of a sliding-pinned Euler-Bernoulli beam.
//!
//! The numerical core is generic over the scalar type; the aliases at the
//! bottom of this file fix it to `f64` for everyday use.

pub mod beam;
pub mod controller;
pub mod dither;
pub mod error;
pub mod kernel;
pub mod quadrature;
pub mod scalar;
pub mod sim;
pub mod special;
pub mod spectrum;
pub mod validate;

pub use beam::{BeamMesh, BeamPlant, BeamState, BoundaryInputs, MapConfig, Measurement, Sampler};
pub use controller::{ControlOptions, ControllerState, EsController, EsGains, GradientFeedback};
pub use dither::DitherParams;
pub use error::{Error, Result};
pub use kernel::{GainProfile, KernelTable};
pub use scalar::Real;
pub use sim::{load_config, run, RunOutput, RunSummary, SimConfig};

pub type Table = KernelTable<f64>;
pub type Profile = GainProfile<f64>;
pub type Plant = BeamPlant<f64>;
pub type Mesh = BeamMesh<f64>;
pub type Controller = EsController<f64>;
pub type Dither = DitherParams<f64>;
pub type Config = SimConfig<f64>;
