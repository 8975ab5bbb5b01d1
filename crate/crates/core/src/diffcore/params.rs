//! Named parameter storage and the versioned checkpoint container.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::{Array, DiffError};

const CHECKPOINT_MAGIC: &[u8; 4] = b"NBF1";

/// Named real arrays shared by the controller, encoder, and output networks.
///
/// Iteration order is the sorted name order, which keeps optimizer updates
/// and serialization deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    entries: BTreeMap<String, Array>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, array: Array) {
        self.entries.insert(name.into(), array);
    }

    pub fn get(&self, name: &str) -> Result<&Array, DiffError> {
        self.entries
            .get(name)
            .ok_or_else(|| DiffError::UnknownParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Array, DiffError> {
        self.entries
            .get_mut(name)
            .ok_or_else(|| DiffError::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Array)> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Array)> {
        self.entries.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar values across all parameters.
    pub fn value_count(&self) -> usize {
        self.entries.values().map(Array::numel).sum()
    }

    /// Serialize to the versioned binary container.
    ///
    /// Layout: magic "NBF1", then per parameter (sorted by name):
    /// name length (u64 LE), UTF-8 name, rank (u64 LE), dims (u64 LE each),
    /// values (f64 LE each).
    pub fn save<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        for (name, array) in &self.entries {
            w.write_all(&(name.len() as u64).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(array.shape().len() as u64).to_le_bytes())?;
            for &d in array.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &v in array.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save_to_path(&self, path: &Path) -> std::io::Result<()> {
        let mut buf = Vec::new();
        self.save(&mut buf)?;
        std::fs::write(path, buf)
    }

    pub fn load<R: Read>(r: &mut R) -> Result<Self, DiffError> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(DiffError::BadCheckpoint(format!(
                "bad magic {magic:?}, expected {CHECKPOINT_MAGIC:?}"
            )));
        }
        let mut entries = BTreeMap::new();
        loop {
            let mut len_buf = [0u8; 8];
            match r.read(&mut len_buf[..1]) {
                Ok(0) => break, // clean EOF between records
                Ok(_) => {}
                Err(e) => return Err(DiffError::BadCheckpoint(e.to_string())),
            }
            read_exact(r, &mut len_buf[1..])?;
            let name_len = u64::from_le_bytes(len_buf) as usize;
            let mut name_buf = vec![0u8; name_len];
            read_exact(r, &mut name_buf)?;
            let name = String::from_utf8(name_buf)
                .map_err(|e| DiffError::BadCheckpoint(format!("non-UTF-8 name: {e}")))?;
            let rank = read_u64(r)? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(read_u64(r)? as usize);
            }
            let numel: usize = shape.iter().product();
            let mut values = Vec::with_capacity(numel);
            for _ in 0..numel {
                let mut b = [0u8; 8];
                read_exact(r, &mut b)?;
                values.push(f64::from_le_bytes(b));
            }
            let array = Array::new(shape, values)
                .map_err(|e| DiffError::BadCheckpoint(format!("param {name}: {e}")))?;
            entries.insert(name, array);
        }
        Ok(ParamStore { entries })
    }

    pub fn load_from_path(path: &Path) -> Result<Self, DiffError> {
        let bytes =
            std::fs::read(path).map_err(|e| DiffError::BadCheckpoint(format!("{path:?}: {e}")))?;
        Self::load(&mut bytes.as_slice())
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), DiffError> {
    r.read_exact(buf)
        .map_err(|e| DiffError::BadCheckpoint(format!("truncated checkpoint: {e}")))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64, DiffError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip() {
        let mut store = ParamStore::new();
        store.insert("w", Array::matrix(2, 3, vec![1.0, -2.0, 3.5, 0.0, 1e-9, 7.0]).unwrap());
        store.insert("b", Array::vector(vec![0.25, -0.75]));
        let mut buf = Vec::new();
        store.save(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"NBF1");
        let loaded = ParamStore::load(&mut buf.as_slice()).unwrap();
        assert_eq!(store, loaded);
    }

    #[test]
    fn bad_magic_rejected() {
        let buf = b"XXXX".to_vec();
        assert!(matches!(
            ParamStore::load(&mut buf.as_slice()),
            Err(DiffError::BadCheckpoint(_))
        ));
    }

    #[test]
    fn truncated_checkpoint_rejected() {
        let mut store = ParamStore::new();
        store.insert("w", Array::vector(vec![1.0, 2.0]));
        let mut buf = Vec::new();
        store.save(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(ParamStore::load(&mut buf.as_slice()).is_err());
    }
}
