//! Seeded 64-bit keyed hashing shared by both filters.

use std::hash::Hasher;

use siphasher::sip::SipHasher13;

/// Two independent keyed hash streams over byte strings, from which the
/// filters derive their index families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyedHasher {
    k0: u64,
    k1: u64,
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl KeyedHasher {
    pub fn new(seed: u64) -> Self {
        KeyedHasher {
            k0: mix(seed ^ 0x9e37_79b9_7f4a_7c15),
            k1: mix(seed.wrapping_add(0x2545_f491_4f6c_dd1d)),
        }
    }

    /// Primary 64-bit hash.
    pub fn hash1(&self, key: &[u8]) -> u64 {
        let mut h = SipHasher13::new_with_keys(self.k0, self.k1);
        h.write(key);
        h.finish()
    }

    /// Secondary 64-bit hash, independent of `hash1`.
    pub fn hash2(&self, key: &[u8]) -> u64 {
        let mut h = SipHasher13::new_with_keys(self.k1 ^ 0x6c62_272e_07bb_0142, self.k0);
        h.write(key);
        h.finish()
    }

    /// Double hashing family h_i = h1 + i * h2 mod m; h2 is forced odd so the
    /// stride never degenerates.
    pub fn index_family(&self, key: &[u8], m: u64, k: u32) -> impl Iterator<Item = u64> {
        let h1 = self.hash1(key);
        let h2 = self.hash2(key) | 1;
        (0..k as u64).map(move |i| h1.wrapping_add(i.wrapping_mul(h2)) % m)
    }
}
