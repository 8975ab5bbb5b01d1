//! IDX image/label file parsing (the MNIST container format).

use std::path::Path;

use super::{DataError, DatasetSource};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn u32_be(&mut self) -> Result<u32, DataError> {
        if self.offset + 4 > self.bytes.len() {
            return Err(DataError::IdxParse {
                offset: self.offset,
                detail: "truncated while reading a 32-bit header field".to_string(),
            });
        }
        let v = u32::from_be_bytes(self.bytes[self.offset..self.offset + 4].try_into().unwrap());
        self.offset += 4;
        Ok(v)
    }

    fn payload(&mut self, len: usize) -> Result<&'a [u8], DataError> {
        if self.offset + len > self.bytes.len() {
            return Err(DataError::IdxParse {
                offset: self.bytes.len(),
                detail: format!(
                    "payload truncated: need {len} bytes from offset {}, file has {}",
                    self.offset,
                    self.bytes.len()
                ),
            });
        }
        let slice = &self.bytes[self.offset..self.offset + len];
        self.offset += len;
        Ok(slice)
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, DataError> {
    let bytes = std::fs::read(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    if bytes.is_empty() {
        return Err(DataError::EmptyFile(path.display().to_string()));
    }
    Ok(bytes)
}

/// Images: big-endian magic 0x00000803, then count, rows, cols, then raw
/// bytes. Pixels are scaled to [0, 1].
pub fn load_idx_images(path: &Path) -> Result<Vec<Vec<f64>>, DataError> {
    let bytes = read_file(path)?;
    let mut r = Reader {
        bytes: &bytes,
        offset: 0,
    };
    let magic = r.u32_be()?;
    if magic != IMAGES_MAGIC {
        return Err(DataError::IdxParse {
            offset: 0,
            detail: format!("bad magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        });
    }
    let count = r.u32_be()? as usize;
    let rows = r.u32_be()? as usize;
    let cols = r.u32_be()? as usize;
    let pixels = rows * cols;
    let payload = r.payload(count * pixels)?;
    if r.offset != bytes.len() {
        return Err(DataError::IdxParse {
            offset: r.offset,
            detail: format!("{} trailing bytes after payload", bytes.len() - r.offset),
        });
    }
    Ok(payload
        .chunks_exact(pixels)
        .map(|img| img.iter().map(|&b| b as f64 / 255.0).collect())
        .collect())
}

/// Labels: big-endian magic 0x00000801, then count, then raw bytes.
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>, DataError> {
    let bytes = read_file(path)?;
    let mut r = Reader {
        bytes: &bytes,
        offset: 0,
    };
    let magic = r.u32_be()?;
    if magic != LABELS_MAGIC {
        return Err(DataError::IdxParse {
            offset: 0,
            detail: format!("bad magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        });
    }
    let count = r.u32_be()? as usize;
    let payload = r.payload(count)?;
    Ok(payload.to_vec())
}

/// Paired image/label ingestion into a labelled vector source.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<DatasetSource, DataError> {
    let images = load_idx_images(images_path)?;
    let labels = load_idx_labels(labels_path)?;
    if images.len() != labels.len() {
        return Err(DataError::IdxParse {
            offset: 0,
            detail: format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            ),
        });
    }
    let labels: Vec<usize> = labels.into_iter().map(|l| l as usize).collect();
    Ok(DatasetSource::from_labelled_vectors(images, labels, 0))
}
