//! Spatial channel model: the drone position grid, Friis path loss,
//! exponentially correlated log-normal shadowing and the resulting gain maps.

mod gain;
mod grid;
mod shadowing;

pub use gain::{build_gain_map, pathloss_db, sample_received_gain, ChannelParams, GainMap, PathlossParams};
pub use grid::{PositionGrid, ReceiverConfig, Role};
pub use shadowing::{
    sample_shadowing_field, shadowing_covariance, FieldMethod, FieldSampler, ShadowingField,
    MAX_EXACT_POSITIONS,
};

pub(crate) fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}
