//! Deterministic, platform-stable randomness.
//!
//! Every stochastic component in the crate draws from a ChaCha stream keyed
//! by (seed, stream) so runs reproduce bit-for-bit, and parallel work can
//! split streams without sharing state. Normals come from Box-Muller rather
//! than a library ziggurat so the byte-level output is pinned across
//! platforms and dependency versions.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A ChaCha generator keyed by a (seed, stream) pair.
pub fn chacha(seed: u64, stream: u64) -> ChaCha12Rng {
    // Mix the stream in before expanding so (s, 0) and (0, s) differ.
    let mut stream_state = stream ^ 0xbb67_ae85_84ca_a73b;
    let mut state = (seed ^ 0x6a09_e667_f3bc_c908).wrapping_add(splitmix64(&mut stream_state));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Uniform double in [0, 1) from the top 53 bits.
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform double in (0, 1]; safe as a logarithm argument.
fn uniform_open<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal via the Box-Muller cosine branch.
pub fn normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = uniform_open(rng);
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Uniform index in [0, n).
pub fn index<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    debug_assert!(n > 0);
    // Rejection-free multiply-shift is fine here; episode sampling does not
    // need exact uniformity beyond 2^-64 bias.
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}
