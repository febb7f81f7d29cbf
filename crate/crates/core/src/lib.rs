//! Closed-form passive beamforming for beyond-diagonal reconfigurable
//! intelligent surfaces, and a two-stage (passive, then active) beamforming
//! pipeline for multi-user MISO downlinks.
//!
//! The modules follow the data flow of an experiment:
//!
//! * [`channel`]: scenario parameters, seeded channel draws, effective channels
//! * [`projections`]: feasible scattering matrices for each architecture
//! * [`passive`]: relaxed solutions and the projected passive design
//! * [`active`]: FP and RZF precoders
//! * [`evaluation`]: Monte-Carlo sweeps and the projected-gradient oracle

pub mod active;
pub mod channel;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod passive;
pub mod projections;

pub use active::{fp_beamforming, rzf_beamforming, sum_rate, FpOptions, FpState, Precoder};
pub use channel::{effective_channel, path_loss, sample_channels, ChannelSet, ScenarioConfig};
pub use error::{Error, Result};
pub use evaluation::{ExperimentResult, ResultRow, StrategySpec};
pub use linalg::{CMatrix, CVector};
pub use passive::{
    passive_design, relaxed_lowcomplexity, relaxed_optimal, sum_channel_gain, Relaxation,
    RelaxedSolution, SolutionMethod,
};
pub use projections::{symuni, Architecture, ScatteringMatrix};
