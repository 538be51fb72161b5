//! Counter-based random substreams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by the
//! master seed and addressed by `(trajectory index, channel)`. Results are
//! therefore independent of the order in which trajectories are evaluated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Independent noise channels of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Dynamical noise `W`.
    State = 0,
    /// Observation noise `U`.
    Observation = 1,
    /// Initial condition draw.
    Initial = 2,
    /// Anything else (bootstrap resampling, test fixtures).
    Auxiliary = 3,
}

const CHANNELS: u64 = 4;

/// Returns the stream for `(master_seed, trajectory, channel)`.
pub fn substream(master_seed: u64, trajectory: u64, channel: Channel) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(trajectory.wrapping_mul(CHANNELS).wrapping_add(channel as u64));
    rng
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
