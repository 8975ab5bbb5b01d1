//! The address matrix: one d_q-dimensional row per memory slot.
//!
//! Trainable mode keeps the matrix in the parameter store. The fixed modes
//! hold a constant Gaussian sample; in seeded mode every 16-row block is a
//! pure function of one 16-bit seed and can be regenerated on the fly, so
//! serializing the seeds costs one bit per slot.

use serde::{Deserialize, Serialize};

use crate::diffcore::Array;
use crate::rng;

/// Stream tag for block regeneration; fixed so rows depend on the seed only.
const ROW_STREAM: u64 = 0x4164_6472_526f_7773; // "AddrRows"
const SEED_LIST_STREAM: u64 = 17;
pub const ROWS_PER_SEED: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddressMode {
    /// Rows live in the parameter store and receive gradients.
    Trainable,
    /// One fixed unit-normal sample, never updated by training.
    GaussianFixed,
    /// Fixed rows regenerated blockwise from 16-bit seeds.
    Seeded,
}

/// Regenerate one 16-row block of the address matrix from its seed.
/// Deterministic across calls and platforms.
pub fn regenerate_address_rows(seed: u16, d_q: usize) -> Array {
    let mut r = rng::chacha(ROW_STREAM, seed as u64);
    let values: Vec<f64> = (0..ROWS_PER_SEED * d_q).map(|_| rng::normal(&mut r)).collect();
    Array::new(vec![ROWS_PER_SEED, d_q], values).expect("normals are finite")
}

#[derive(Debug, Clone, PartialEq)]
pub struct AddressMatrix {
    mode: AddressMode,
    m_slots: usize,
    d_q: usize,
    /// Materialized rows for the fixed modes; trainable rows live in params.
    rows: Option<Array>,
    seeds: Vec<u16>,
}

impl AddressMatrix {
    pub fn trainable(m_slots: usize, d_q: usize) -> Self {
        AddressMatrix {
            mode: AddressMode::Trainable,
            m_slots,
            d_q,
            rows: None,
            seeds: Vec::new(),
        }
    }

    pub fn gaussian_fixed(m_slots: usize, d_q: usize, seed: u64) -> Self {
        let mut r = rng::chacha(seed, SEED_LIST_STREAM);
        let values: Vec<f64> = (0..m_slots * d_q).map(|_| rng::normal(&mut r)).collect();
        AddressMatrix {
            mode: AddressMode::GaussianFixed,
            m_slots,
            d_q,
            rows: Some(Array::new(vec![m_slots, d_q], values).expect("normals are finite")),
            seeds: Vec::new(),
        }
    }

    pub fn seeded(m_slots: usize, d_q: usize, master_seed: u64) -> Self {
        let blocks = m_slots.div_ceil(ROWS_PER_SEED);
        let mut r = rng::chacha(master_seed, SEED_LIST_STREAM);
        let seeds: Vec<u16> = (0..blocks)
            .map(|_| (rand::RngCore::next_u64(&mut r) & 0xffff) as u16)
            .collect();
        let rows = Self::materialize(&seeds, m_slots, d_q);
        AddressMatrix {
            mode: AddressMode::Seeded,
            m_slots,
            d_q,
            rows: Some(rows),
            seeds,
        }
    }

    pub fn from_seeds(seeds: Vec<u16>, m_slots: usize, d_q: usize) -> Self {
        let rows = Self::materialize(&seeds, m_slots, d_q);
        AddressMatrix {
            mode: AddressMode::Seeded,
            m_slots,
            d_q,
            rows: Some(rows),
            seeds,
        }
    }

    fn materialize(seeds: &[u16], m_slots: usize, d_q: usize) -> Array {
        assert!(seeds.len() * ROWS_PER_SEED >= m_slots, "not enough seeds");
        let mut values = Vec::with_capacity(m_slots * d_q);
        for (block, &seed) in seeds.iter().enumerate() {
            let rows = regenerate_address_rows(seed, d_q);
            let take = (m_slots - block * ROWS_PER_SEED).min(ROWS_PER_SEED);
            values.extend_from_slice(&rows.values()[..take * d_q]);
            if take < ROWS_PER_SEED {
                break;
            }
        }
        Array::new(vec![m_slots, d_q], values).expect("normals are finite")
    }

    pub fn mode(&self) -> AddressMode {
        self.mode
    }

    pub fn m_slots(&self) -> usize {
        self.m_slots
    }

    pub fn d_q(&self) -> usize {
        self.d_q
    }

    /// Fixed rows; `None` in trainable mode (they live in the ParamStore).
    pub fn fixed_rows(&self) -> Option<&Array> {
        self.rows.as_ref()
    }

    pub fn seeds(&self) -> &[u16] {
        &self.seeds
    }

    /// Initial value for the trainable parameter: normals scaled by 1/sqrt(d_q).
    pub fn trainable_init(&self, seed: u64) -> Array {
        let scale = 1.0 / (self.d_q as f64).sqrt();
        let mut r = rng::chacha(seed, SEED_LIST_STREAM ^ 1);
        let values: Vec<f64> = (0..self.m_slots * self.d_q)
            .map(|_| rng::normal(&mut r) * scale)
            .collect();
        Array::new(vec![self.m_slots, self.d_q], values).expect("normals are finite")
    }

    /// Serialize the seed list as little-endian 16-bit integers.
    pub fn seeds_to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.seeds.len() * 2);
        for s in &self.seeds {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn seeds_from_bytes(bytes: &[u8], m_slots: usize, d_q: usize) -> Option<Self> {
        if bytes.len() % 2 != 0 {
            return None;
        }
        let seeds: Vec<u16> = bytes
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        if seeds.len() * ROWS_PER_SEED < m_slots {
            return None;
        }
        Some(Self::from_seeds(seeds, m_slots, d_q))
    }
}
