//! Bloom filter: bit vector with k double-hashed locations per key.

use super::hash::KeyedHasher;
use super::{bloom_size_for, FilterError};

const MAGIC: &[u8; 4] = b"BLM1";

#[derive(Debug, Clone, PartialEq)]
pub struct BloomFilter {
    m: u64,
    k: u32,
    seed: u64,
    words: Vec<u64>,
    hasher: KeyedHasher,
}

impl BloomFilter {
    pub fn new(m: u64, k: u32, seed: u64) -> Result<Self, FilterError> {
        if m < 1 {
            return Err(FilterError::InvalidCount);
        }
        if k < 1 || k > 64 {
            return Err(FilterError::InvalidEpsilon(k as f64));
        }
        let words = vec![0u64; m.div_ceil(64) as usize];
        Ok(BloomFilter {
            m,
            k,
            seed,
            words,
            hasher: KeyedHasher::new(seed),
        })
    }

    /// Size for `n` expected elements at false-positive rate `epsilon`.
    pub fn for_config(n: usize, epsilon: f64, seed: u64) -> Result<Self, FilterError> {
        let (m, k) = bloom_size_for(n, epsilon)?;
        BloomFilter::new(m, k, seed)
    }

    pub fn bit_count(&self) -> u64 {
        self.m
    }

    pub fn hash_count(&self) -> u32 {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn insert(&mut self, key: &[u8]) {
        let (m, k) = (self.m, self.k);
        let indices: Vec<u64> = self.hasher.index_family(key, m, k).collect();
        for idx in indices {
            self.words[(idx / 64) as usize] |= 1u64 << (idx % 64);
        }
    }

    pub fn query(&self, key: &[u8]) -> bool {
        self.hasher
            .index_family(key, self.m, self.k)
            .all(|idx| self.words[(idx / 64) as usize] & (1u64 << (idx % 64)) != 0)
    }

    /// Number of set bits; monotone under inserts.
    pub fn popcount(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Serialize: magic "BLM1", little-endian m, k, seed, then the raw bit
    /// payload as 64-bit words.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + 8 * 3 + self.words.len() * 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.m.to_le_bytes());
        out.extend_from_slice(&(self.k as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FilterError> {
        let bad = |msg: &str| FilterError::BadSerialization(msg.to_string());
        if bytes.len() < 28 || &bytes[..4] != MAGIC {
            return Err(bad("missing BLM1 header"));
        }
        let m = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
        let k = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let seed = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
        let word_count = m.div_ceil(64) as usize;
        let payload = &bytes[28..];
        if payload.len() != word_count * 8 {
            return Err(bad("payload length does not match bit count"));
        }
        let mut filter = BloomFilter::new(m, k as u32, seed)?;
        for (i, chunk) in payload.chunks_exact(8).enumerate() {
            filter.words[i] = u64::from_le_bytes(chunk.try_into().unwrap());
        }
        Ok(filter)
    }
}
