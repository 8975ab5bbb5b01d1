//! The unit stored and queried by every filter and model: either a dense
//! real vector (e.g. a flattened image) or a byte string (e.g. a row key).

use std::borrow::Cow;

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Vector(Vec<f64>),
    Bytes(Vec<u8>),
}

impl Item {
    pub fn from_str(s: &str) -> Self {
        Item::Bytes(s.as_bytes().to_vec())
    }

    /// Stable byte representation used as the hash key for classical filters.
    pub fn key_bytes(&self) -> Cow<'_, [u8]> {
        match self {
            Item::Bytes(b) => Cow::Borrowed(b),
            Item::Vector(v) => {
                let mut out = Vec::with_capacity(v.len() * 8);
                for x in v {
                    out.extend_from_slice(&x.to_le_bytes());
                }
                Cow::Owned(out)
            }
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Item::Vector(v) => Some(v),
            Item::Bytes(_) => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&[u8]> {
        match self {
            Item::Bytes(b) => Some(b),
            Item::Vector(_) => None,
        }
    }
}
