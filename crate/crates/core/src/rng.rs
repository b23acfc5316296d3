//! Deterministic counter-based random streams.
//!
//! Every random draw in the toolkit comes from a stream keyed by
//! (master seed, subsystem tag, counters); there is no hidden global RNG
//! state, so results are independent of execution order and thread count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

/// Derives a ChaCha stream from sha256(master || tag || counters).
pub fn stream(master: u64, tag: &str, counters: &[u64]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update([0xff]); // separator between seed and tag
    hasher.update(tag.as_bytes());
    hasher.update([0xfe]);
    for &c in counters {
        hasher.update(c.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

/// Fills `out` with N(0, sigma^2) draws.
pub fn fill_gaussian<R: Rng>(rng: &mut R, sigma: f64, out: &mut [f64]) {
    for v in out.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v = sigma * z;
    }
}

/// One N(0, sigma^2 I_d) noise vector.
pub fn gaussian_vec<R: Rng>(rng: &mut R, sigma: f64, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    fill_gaussian(rng, sigma, &mut out);
    out
}
