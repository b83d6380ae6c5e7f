//! Physical-layer secret key generation between a mobile drone and a ground
//! station in the presence of a curious ground device.
//!
//! The drone (Alice) learns the expected channel gain from every position of a
//! grid to Bob and to Eve, restricts its movement to positions that look the
//! same to Eve (an isohypse), and picks positions at random from the
//! distribution that maximizes the mutual information between its expected
//! gains and Bob's quantized estimates.

pub mod capacity;
pub mod channel;
mod error;
pub mod estimation;
pub mod experiment;
pub mod export;
pub mod partition;
pub mod protocol;
pub mod rng;

pub use capacity::{CapacityResult, ChannelMatrix, PositionDistribution, Quantizer, SolverOptions};
pub use channel::{ChannelParams, GainMap, PathlossParams, PositionGrid, ReceiverConfig, Role, ShadowingField};
pub use error::{Error, Result};
pub use estimation::CalibrationParams;
pub use experiment::{DeltaE, ExperimentConfig, Sweep, SweepAxis};
pub use partition::IsohypsePartition;
pub use protocol::{KeyMaterial, ProtocolReport, TrajectoryPlan};
