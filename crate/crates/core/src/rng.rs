//! Seeded random streams.
//!
//! Every run is driven by a single `u64` seed. Independent sub-streams for
//! trait sampling, graph sampling, weight sampling and dynamics are derived
//! from it by SplitMix64 mixing of `(seed, stream tag, index)`, so each
//! component can be regenerated on its own. The generator is PCG64
//! (XSL-RR 128/64).

use rand::SeedableRng;
use rand_pcg::Pcg64;

pub type SimRng = Pcg64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Traits,
    Graph,
    Weights,
    Dynamics,
    Fluctuations,
    Initial,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Traits => 0x7472_6169_7473,
            Stream::Graph => 0x0067_7261_7068,
            Stream::Weights => 0x7765_6967_6874,
            Stream::Dynamics => 0x6479_6e61_6d69,
            Stream::Fluctuations => 0x0066_6c75_6374,
            Stream::Initial => 0x696e_6974,
        }
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sub-stream `index` of `stream` under the master `seed`.
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream.tag()) ^ index)
}

pub fn stream_rng(seed: u64, stream: Stream, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, stream, index))
}

/// Master seed of replica `r` of a run seeded with `seed`.
pub fn replica_seed(seed: u64, r: u64) -> u64 {
    splitmix64(seed ^ splitmix64(r.wrapping_add(0x7265_706c)))
}
