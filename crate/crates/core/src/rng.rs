//! Seeded random streams.
//!
//! All randomness goes through [`Stream`], a thin wrapper over the ChaCha20
//! block cipher used as a counter-based generator (`rand_chacha` 0.9,
//! `ChaCha20Rng`). A stream is addressed by a 64-bit key and a 64-bit stream
//! id:
//!
//! - the key is expanded with `SeedableRng::seed_from_u64`,
//! - the stream id is selected with `ChaCha20Rng::set_stream`.
//!
//! Per-trajectory streams use the key `seed + trajectory_index` (wrapping),
//! so trajectory `i` of a dataset does not depend on how many trajectories
//! were requested. The stream ids in use are listed in [`StreamId`].
//!
//! Uniform variates take the top 53 bits of one `u64` draw; normal variates
//! use the Marsaglia polar method, caching the second value of each pair.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamId {
    InitialConditions = 0,
    MeasurementNoise = 1,
    ReferencePerturbation = 2,
    Restarts = 3,
    Validation = 4,
}

#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl Stream {
    pub fn new(key: u64, id: StreamId) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(key);
        rng.set_stream(id as u64);
        Self { rng, spare: None }
    }

    /// Stream for trajectory `index` of a dataset generated with `seed`.
    pub fn for_trajectory(seed: u64, index: usize, id: StreamId) -> Self {
        Self::new(seed.wrapping_add(index as u64), id)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.rng.next_u64() >> 11) as f64 * SCALE
    }

    /// Uniform on `[lo, hi)`; returns `lo` exactly when `lo == hi`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * factor);
                return u * factor;
            }
        }
    }

    pub fn normal(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.standard_normal()
    }
}
