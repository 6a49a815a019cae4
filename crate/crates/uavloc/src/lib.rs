//! Single-UAV emitter localization from joint Doppler and time-of-arrival
//! measurements.
//!
//! A moving UAV collects frames of `K` paired (Doppler, ToA) samples of a
//! stationary ground emitter while flying a straight constant-velocity leg per
//! frame. Scaling each Doppler sample by its ToA-implied range turns the
//! Doppler least-squares cost into a quadratic whose minimizers form a line;
//! stacking that line on top of the linearized ToA equations gives a small
//! constrained least-squares system with the quadratic coupling
//! `r_z = r_x^2 + r_y^2`, solved in closed form via a Lagrange multiplier.
//! Between frames the UAV velocity for the next leg is chosen in closed form
//! so the newest range-scaled Doppler sample is explained exactly.
//!
//! Module map:
//! - [`measurement`]: measurement models and noisy frame synthesis
//! - [`localization`]: the per-frame constrained least-squares estimator
//! - [`trajectory`]: the per-frame velocity design
//! - [`sim`]: Monte Carlo harness (frame loop, SNR sweep, trajectory A/B)
//! - [`config`]: scenario configuration and JSON schema
//! - [`cli`]: command-line front end and result serialization

pub mod cli;
pub mod config;
pub mod error;
pub mod localization;
pub mod measurement;
pub mod sim;
pub mod trajectory;

pub use config::ScenarioConfig;
pub use error::Error;
pub use localization::{EmitterEstimate, EstimateBranch};
pub use measurement::{EmitterPosition, MeasurementFrame, SignalParams, UavState};
pub use trajectory::{VelocityBranch, VelocityCommand};
