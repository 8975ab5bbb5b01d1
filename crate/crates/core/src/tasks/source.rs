//! Dataset sources: synthetic clusters and token universes, file ingestion,
//! and train/test splitting.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::item::Item;
use crate::rng;

use super::DataError;

/// Declarative source description, as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    SyntheticClusters {
        classes: usize,
        dim: usize,
        noise: f64,
        items_per_class: usize,
        seed: u64,
    },
    SyntheticTokens {
        count: usize,
        seed: u64,
    },
    IdxImages {
        images: String,
        labels: String,
    },
    TokenFile {
        path: String,
    },
}

/// Materialized items, optional class labels, and the fixed permutation used
/// by exponential sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSource {
    items: Vec<Item>,
    labels: Option<Vec<usize>>,
    /// Items are bytewise-sorted tokens (required by database-range sampling).
    sorted_tokens: bool,
    permutation: Vec<usize>,
}

impl DatasetSource {
    pub fn from_spec(spec: &SourceSpec) -> Result<Self, DataError> {
        match spec {
            SourceSpec::SyntheticClusters { .. } | SourceSpec::SyntheticTokens { .. } => {
                Ok(generate_synthetic(spec))
            }
            SourceSpec::IdxImages { images, labels } => {
                super::load_idx(Path::new(images), Path::new(labels))
            }
            SourceSpec::TokenFile { path } => {
                let (tokens, _dupes) = load_token_universe(Path::new(path))?;
                Ok(DatasetSource::from_tokens(tokens, 0))
            }
        }
    }

    pub fn from_labelled_vectors(items: Vec<Vec<f64>>, labels: Vec<usize>, perm_seed: u64) -> Self {
        assert_eq!(items.len(), labels.len());
        let items: Vec<Item> = items.into_iter().map(Item::Vector).collect();
        let permutation = seeded_permutation(items.len(), perm_seed);
        DatasetSource {
            items,
            labels: Some(labels),
            sorted_tokens: false,
            permutation,
        }
    }

    /// Tokens are deduplicated and sorted bytewise.
    pub fn from_tokens(tokens: Vec<String>, perm_seed: u64) -> Self {
        let set: BTreeSet<String> = tokens.into_iter().collect();
        let items: Vec<Item> = set.into_iter().map(|t| Item::Bytes(t.into_bytes())).collect();
        let permutation = seeded_permutation(items.len(), perm_seed);
        DatasetSource {
            items,
            labels: None,
            sorted_tokens: true,
            permutation,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, index: usize) -> &Item {
        &self.items[index]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn is_sorted_tokens(&self) -> bool {
        self.sorted_tokens
    }

    /// The fixed permutation backing exponential weights.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Class label -> item indices.
    pub fn class_indices(&self) -> Result<Vec<Vec<usize>>, DataError> {
        let labels = self.labels.as_ref().ok_or(DataError::MissingLabels)?;
        let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut buckets = vec![Vec::new(); classes];
        for (i, &c) in labels.iter().enumerate() {
            buckets[c].push(i);
        }
        Ok(buckets)
    }

    /// SHA-256 over the canonical item bytes, for manifests and
    /// reproducibility checks.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for item in &self.items {
            let bytes = item.key_bytes();
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(bytes.as_ref());
        }
        if let Some(labels) = &self.labels {
            for &l in labels {
                hasher.update((l as u64).to_le_bytes());
            }
        }
        hex_string(&hasher.finalize())
    }

    /// Disjoint train/test split. Labelled sources split within each class;
    /// token sources shuffle, split, and re-sort each side.
    pub fn split(&self, test_fraction: f64, seed: u64) -> (DatasetSource, DatasetSource) {
        let mut r = rng::chacha(seed, 0x5b11);
        let mut take_test = |indices: &mut Vec<usize>| {
            // deterministic shuffle then cut
            for i in (1..indices.len()).rev() {
                indices.swap(i, rng::index(&mut r, i + 1));
            }
            let test_count = ((indices.len() as f64) * test_fraction).round() as usize;
            let test: Vec<usize> = indices[..test_count].to_vec();
            let train: Vec<usize> = indices[test_count..].to_vec();
            (train, test)
        };

        let (train_idx, test_idx) = if let Some(_labels) = &self.labels {
            let buckets = self.class_indices().expect("labels verified above");
            let mut train = Vec::new();
            let mut test = Vec::new();
            for mut bucket in buckets {
                let (tr, te) = take_test(&mut bucket);
                train.extend(tr);
                test.extend(te);
            }
            (train, test)
        } else {
            let mut all: Vec<usize> = (0..self.items.len()).collect();
            take_test(&mut all)
        };

        (
            self.subset(&train_idx, seed ^ 0x7261),
            self.subset(&test_idx, seed ^ 0x7465),
        )
    }

    fn subset(&self, indices: &[usize], perm_seed: u64) -> DatasetSource {
        let mut items: Vec<Item> = indices.iter().map(|&i| self.items[i].clone()).collect();
        let mut labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i]).collect::<Vec<usize>>());
        if self.sorted_tokens {
            items.sort_by(|a, b| a.key_bytes().cmp(&b.key_bytes()));
            labels = None;
        }
        let permutation = seeded_permutation(items.len(), perm_seed);
        DatasetSource {
            items,
            labels,
            sorted_tokens: self.sorted_tokens,
            permutation,
        }
    }
}

fn seeded_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut r = rng::chacha(seed, 0x9e13);
    for i in (1..n).rev() {
        perm.swap(i, rng::index(&mut r, i + 1));
    }
    perm
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Synthetic stand-ins: class clusters on the unit sphere, or random
/// lowercase tokens.
pub fn generate_synthetic(spec: &SourceSpec) -> DatasetSource {
    match *spec {
        SourceSpec::SyntheticClusters {
            classes,
            dim,
            noise,
            items_per_class,
            seed,
        } => {
            let mut r = rng::chacha(seed, 0xc1u64);
            let mut centers = Vec::with_capacity(classes);
            for _ in 0..classes {
                let mut c: Vec<f64> = (0..dim).map(|_| rng::normal(&mut r)).collect();
                let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                for v in c.iter_mut() {
                    *v /= norm;
                }
                centers.push(c);
            }
            let mut items = Vec::with_capacity(classes * items_per_class);
            let mut labels = Vec::with_capacity(classes * items_per_class);
            for (class, center) in centers.iter().enumerate() {
                for _ in 0..items_per_class {
                    let item: Vec<f64> = center
                        .iter()
                        .map(|&c| c + noise * rng::normal(&mut r))
                        .collect();
                    items.push(item);
                    labels.push(class);
                }
            }
            DatasetSource::from_labelled_vectors(items, labels, seed)
        }
        SourceSpec::SyntheticTokens { count, seed } => {
            let mut r = rng::chacha(seed, 0x70u64);
            let mut tokens = BTreeSet::new();
            while tokens.len() < count {
                let len = 4 + rng::index(&mut r, 9); // 4..=12
                let token: String = (0..len)
                    .map(|_| (b'a' + rng::index(&mut r, 26) as u8) as char)
                    .collect();
                tokens.insert(token);
            }
            DatasetSource::from_tokens(tokens.into_iter().collect(), seed)
        }
        SourceSpec::IdxImages { .. } | SourceSpec::TokenFile { .. } => {
            panic!("generate_synthetic called with a file-backed spec")
        }
    }
}

/// Newline-delimited UTF-8 tokens: deduplicated, bytewise-sorted.
/// Returns the universe and the number of duplicates removed.
pub fn load_token_universe(path: &Path) -> Result<(Vec<String>, usize), DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: Vec<&str> = text.lines().filter(|l| !l.is_empty()).collect();
    if raw.is_empty() {
        return Err(DataError::EmptyFile(path.display().to_string()));
    }
    let set: BTreeSet<String> = raw.iter().map(|s| s.to_string()).collect();
    let dupes = raw.len() - set.len();
    Ok((set.into_iter().collect(), dupes))
}

/// Manifest describing a generated or ingested dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub source: SourceSpec,
    pub item_count: usize,
    pub class_count: Option<usize>,
    pub checksum: String,
}

impl DatasetManifest {
    pub fn describe(spec: &SourceSpec, source: &DatasetSource) -> Self {
        DatasetManifest {
            source: spec.clone(),
            item_count: source.len(),
            class_count: source
                .labels()
                .map(|l| l.iter().copied().max().map_or(0, |m| m + 1)),
            checksum: source.checksum(),
        }
    }
}
