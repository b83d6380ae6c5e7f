//! Seed streams.
//!
//! A master seed is split into per-repetition seeds, and each repetition seed
//! into labelled component streams. Every stream is a ChaCha8 generator keyed by
//! the derived seed, so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Labels for the independent randomness consumers of one repetition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    FieldBob,
    FieldEve,
    FadingBob,
    FadingEve,
    Trajectory,
    TrainingBob,
    TrainingEve,
}

impl Stream {
    fn label(self) -> u64 {
        match self {
            Stream::FieldBob => 0x6669_656c_645f_6262,
            Stream::FieldEve => 0x6669_656c_645f_6576,
            Stream::FadingBob => 0x6661_6469_6e67_6262,
            Stream::FadingEve => 0x6661_6469_6e67_6576,
            Stream::Trajectory => 0x7472_616a_6563_7400,
            Stream::TrainingBob => 0x7472_6169_6e5f_6262,
            Stream::TrainingEve => 0x7472_6169_6e5f_6576,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of repetition `rep` under `master`.
pub fn repetition_seed(master: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(rep.wrapping_add(0x5245_5045_5449_5449)))
}

/// Seed of a labelled component stream within a repetition.
pub fn stream_seed(rep_seed: u64, stream: Stream) -> u64 {
    splitmix64(rep_seed ^ splitmix64(stream.label()))
}

pub fn stream_rng(rep_seed: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(rep_seed, stream))
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
