//! Counter-based normal draws.
//!
//! Every draw is a pure function of `(master seed, stream id, path index, step index)`.
//! The ChaCha key is built from the master seed and the stream id, the ChaCha stream
//! selector is the path index and the block counter position is `4 * step`. Each step
//! consumes two 64-bit words which Box-Muller turns into one pair of independent
//! standard normals, so the order in which paths are simulated never matters.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Stream ids used by the engine for distinct purposes.
pub mod streams {
    pub const INDEX: u64 = 0;
    pub const ORACLE: u64 = 1;
    pub const SCALING: u64 = 2;
    pub const REGULARITY: u64 = 3;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master: u64,
    pub stream: u64,
}

impl SeedSpec {
    pub fn new(master: u64, stream: u64) -> Self {
        SeedSpec { master, stream }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        SeedSpec { stream, ..self }
    }

    fn key(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream.to_le_bytes());
        key[16..].copy_from_slice(b"qgfbsde-normals\0");
        key
    }

    /// Sequential draws for one path, starting at step 0.
    pub fn path_normals(&self, path: u64) -> PathNormals {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(path);
        PathNormals { rng }
    }

    /// Random access to the draw pair of `(path, step)`.
    pub fn normal_pair(&self, path: u64, step: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::from_seed(self.key());
        rng.set_stream(path);
        rng.set_word_pos(4 * step as u128);
        box_muller(rng.next_u64(), rng.next_u64())
    }
}

pub struct PathNormals {
    rng: ChaCha8Rng,
}

impl PathNormals {
    /// The next pair of independent standard normals.
    pub fn next_pair(&mut self) -> (f64, f64) {
        box_muller(self.rng.next_u64(), self.rng.next_u64())
    }
}

fn box_muller(a: u64, b: u64) -> (f64, f64) {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((a >> 11) + 1) as f64 * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}
