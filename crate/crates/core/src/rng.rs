//! Seed splitting.
//!
//! Every random quantity comes from one master seed. A consumer asks for a
//! [`ChaCha8Rng`] keyed by the master seed with a stream id chosen from a
//! fixed domain, so independent tasks never share a keystream and the draw
//! order inside one task fully determines its output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. The high 16 bits of the stream id select the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Trajectory = 1,
    Calibration = 2,
    Scaling = 3,
    CenterOfMass = 4,
    Maximizer = 5,
    Geometry = 6,
    Test = 7,
}

/// Generator for item `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) | (index & 0x0000_ffff_ffff_ffff));
    rng
}
