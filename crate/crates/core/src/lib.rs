//! Multi-BS downlink with a shared reconfigurable intelligent surface:
//! user association, ZF precoding, fractional-programming RIS phase design
//! and exhaustive RIS assignment, plus a Monte Carlo harness.

pub mod association;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod precoder;
pub mod ris_optimizer;
pub mod scenario;
pub mod system_model;

pub type C64 = nalgebra::Complex<f64>;

pub use association::{solve, solve_with, PassiveMode, PrecoderPolicy};
pub use channel::ChannelSet;
pub use error::{ConfigError, Error, Result};
pub use precoder::BeamformerSet;
pub use ris_optimizer::SolverSettings;
pub use system_model::{AssociationState, NetworkSolution, PhaseProfile, RisAssignment, SystemConfig};
