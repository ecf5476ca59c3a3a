//! Seeded random substreams.
//!
//! Every consumer of randomness derives its generator from one master seed and
//! a [`Stream`] tag, so adding draws to one consumer never shifts another. Per
//! point substreams (sampling chains, prior draws) additionally select the
//! ChaCha stream id by point index, which makes a batch of `n` trajectories
//! decomposable into any partition without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tag of a random substream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Data,
    Init,
    Shuffle,
    Time,
    Noise,
    Prior,
    Chain,
    Cluster,
    Effort,
    Reference,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Data => 0x01,
            Stream::Init => 0x02,
            Stream::Shuffle => 0x03,
            Stream::Time => 0x04,
            Stream::Noise => 0x05,
            Stream::Prior => 0x06,
            Stream::Chain => 0x07,
            Stream::Cluster => 0x08,
            Stream::Effort => 0x09,
            Stream::Reference => 0x0a,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one purpose under a master seed.
pub fn substream(seed: u64, stream: Stream) -> Rng {
    Rng::seed_from_u64(splitmix64(seed ^ splitmix64(stream.tag())))
}

/// Generator for one purpose and one point index under a master seed.
pub fn point_stream(seed: u64, stream: Stream, index: usize) -> Rng {
    let mut rng = substream(seed, stream);
    rng.set_stream(index as u64);
    rng
}
