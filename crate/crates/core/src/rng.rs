//! Seeded random streams.
//!
//! Every experiment seed drives a ChaCha20 generator; independent parts of
//! a simulation draw from separate ChaCha streams of the same key so that,
//! for example, changing the measurement-noise level does not perturb the
//! trajectory.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub use rand_chacha::ChaCha20Rng as SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Trajectory = 1,
    MeasurementNoise = 2,
    Target = 3,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
