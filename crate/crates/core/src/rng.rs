//! Deterministic random streams keyed by `(seed, purpose, index)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Region samples; index = region id.
    Sampling,
    /// Annealing noise and Metropolis draws; index = repair round.
    Annealing,
    /// Seed-controller synthesis.
    Synthesis,
    /// Fresh samples for soundness audits; index = region id.
    Audit,
}

impl Purpose {
    fn salt(self) -> u64 {
        match self {
            Purpose::Sampling => 0x5a4d_504c_0000_0001,
            Purpose::Annealing => 0x414e_4e4c_0000_0002,
            Purpose::Synthesis => 0x5359_4e54_0000_0003,
            Purpose::Audit => 0x4155_4449_0000_0004,
        }
    }
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ purpose.salt());
    rng.set_stream(index);
    rng
}
