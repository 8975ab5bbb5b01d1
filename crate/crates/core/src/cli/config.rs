//! JSON configuration: parsing, dotted-path overrides, cross-field
//! validation, and the canonical config hash.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::metatrain::{ModelConfig, SweepGrid, TrainConfig};
use crate::tasks::{SourceSpec, TaskSpec};

use super::CliError;

fn default_alpha() -> f64 {
    0.01
}

fn default_precision() -> u32 {
    32
}

fn default_budget() -> usize {
    50_000
}

fn default_batch_sizes() -> Vec<usize> {
    vec![1, 10_000]
}

fn default_repeats() -> usize {
    5
}

fn default_episodes_per_size() -> usize {
    4
}

fn default_test_fraction() -> f64 {
    0.2
}

/// A model entry for eval/bench/compare: optionally backed by a checkpoint,
/// optionally pinned to an explicit operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    pub name: String,
    pub model: ModelConfig,
    #[serde(default)]
    pub checkpoint: Option<String>,
    /// Explicit threshold; when absent, eval/compare calibrate at alpha/2.
    #[serde(default)]
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub entry: ModelEntry,
    pub task: TaskSpec,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_precision")]
    pub precision_bits: u32,
    #[serde(default = "default_budget")]
    pub query_budget: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub allow_long_unroll: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub base: TrainConfig,
    pub grid: SweepGrid,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_precision")]
    pub precision_bits: u32,
    #[serde(default = "default_episodes_per_size")]
    pub eval_episodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    pub task: TaskSpec,
    #[serde(default)]
    pub models: Vec<ModelEntry>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_batch_sizes")]
    pub batch_sizes: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Include the classical baselines in the table.
    #[serde(default = "default_true")]
    pub classical: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub task: TaskSpec,
    /// May be empty: classical-only comparison runs without any training.
    #[serde(default)]
    pub models: Vec<ModelEntry>,
    pub set_sizes: Vec<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_precision")]
    pub precision_bits: u32,
    #[serde(default = "default_episodes_per_size")]
    pub episodes_per_size: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDataSection {
    pub source: SourceSpec,
    /// Also write the materialized items (token universes as text files).
    #[serde(default = "default_true")]
    pub write_items: bool,
}

/// The whole config file. Each command reads its own section.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkbenchConfig {
    /// Master seed; propagated into every section at resolve time.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub eval: Option<EvalSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub bench: Option<BenchSection>,
    #[serde(default)]
    pub compare: Option<CompareSection>,
    #[serde(default)]
    pub gen_data: Option<GenDataSection>,
}

/// Apply one `a.b.c=value` override into the JSON tree. Values parse as
/// JSON when possible, else as strings.
fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw_value) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not key=value")))?;
    let value: Value = serde_json::from_str(raw_value)
        .unwrap_or_else(|_| Value::String(raw_value.to_string()));
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, segment) in segments.iter().enumerate() {
        if segment.is_empty() {
            return Err(CliError::Config(format!("override path {path:?} has an empty segment")));
        }
        let map = node.as_object_mut().ok_or_else(|| {
            CliError::Config(format!(
                "override path {path:?}: {:?} is not an object",
                segments[..i].join(".")
            ))
        })?;
        if i + 1 == segments.len() {
            map.insert(segment.to_string(), value);
            return Ok(());
        }
        node = map
            .entry(segment.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("loop returns on the last segment")
}

/// Canonical serialization: object keys sorted, compact separators.
fn canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            out.push('{');
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key).expect("string serializes"));
                out.push(':');
                canonical(&map[*key], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonical(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

pub fn config_hash(config: &WorkbenchConfig) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    let mut text = String::new();
    canonical(&value, &mut text);
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn propagate_seed(config: &mut WorkbenchConfig) {
    if let Some(train) = &mut config.train {
        train.seed = config.seed;
    }
    if let Some(sweep) = &mut config.sweep {
        sweep.base.seed = config.seed;
    }
}

fn validate(config: &WorkbenchConfig) -> Result<(), CliError> {
    if let Some(train) = &config.train {
        train.validate().map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Some(sweep) = &config.sweep {
        sweep
            .base
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    for (task, model) in [
        config.eval.as_ref().map(|e| (&e.task, Some(&e.entry.model))),
        config.bench.as_ref().map(|b| (&b.task, None)),
        config.compare.as_ref().map(|c| (&c.task, None)),
    ]
    .into_iter()
    .flatten()
    {
        task.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(ModelConfig::Nbf(nbf)) = model {
            nbf.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
    }
    if let Some(eval) = &config.eval {
        if !matches!(eval.precision_bits, 16 | 32 | 64) {
            return Err(CliError::Config(format!(
                "eval.precision_bits must be 16, 32, or 64, got {}",
                eval.precision_bits
            )));
        }
    }
    Ok(())
}

/// Read, override, validate, and hash a configuration file.
pub fn parse_config(
    path: &Path,
    overrides: &[String],
    seed_flag: Option<u64>,
) -> Result<(WorkbenchConfig, String), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, overrides, seed_flag)
}

pub fn parse_config_str(
    text: &str,
    overrides: &[String],
    seed_flag: Option<u64>,
) -> Result<(WorkbenchConfig, String), CliError> {
    let mut value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    if !value.is_object() {
        return Err(CliError::Config("config root must be a JSON object".to_string()));
    }
    for assignment in overrides {
        apply_override(&mut value, assignment)?;
    }
    if let Some(seed) = seed_flag {
        value
            .as_object_mut()
            .expect("checked above")
            .insert("seed".to_string(), Value::from(seed));
    }
    let mut config: WorkbenchConfig = serde_json::from_value(value)
        .map_err(|e| CliError::Config(e.to_string()))?;
    propagate_seed(&mut config);
    validate(&config)?;
    let hash = config_hash(&config);
    Ok((config, hash))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_parses_with_stable_hash() {
        let (a, hash_a) = parse_config_str("{}", &[], None).unwrap();
        let (b, hash_b) = parse_config_str("{}", &[], None).unwrap();
        assert_eq!(a, b);
        assert_eq!(hash_a, hash_b);
        assert_eq!(a.seed, 0);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = parse_config_str(r#"{"sede": 3}"#, &[], None).unwrap_err();
        assert!(err.to_string().contains("sede"), "{err}");
    }

    #[test]
    fn overrides_and_files_hash_identically() {
        let from_file = r#"{"seed": 9}"#;
        let (a, hash_a) = parse_config_str(from_file, &[], None).unwrap();
        let (b, hash_b) =
            parse_config_str("{}", &["seed=9".to_string()], None).unwrap();
        assert_eq!(a, b);
        assert_eq!(hash_a, hash_b);
    }

    #[test]
    fn constraint_violations_name_the_key() {
        let config = r#"{
            "train": {
                "model": {"kind": "nbf", "m_slots": 64, "d_w": 2, "d_q": 8,
                          "address_mode": "trainable",
                          "encoder": {"kind": "dense_mlp", "input_dim": 4, "output_dim": 8}},
                "task": {"kind": "uniform", "set_size": 5, "query_count": 5,
                         "source": {"kind": "synthetic_tokens", "count": 100, "seed": 1}},
                "max_steps": 1
            }
        }"#;
        let err = parse_config_str(
            config,
            &["train.model.k_addr=1000".to_string()],
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("k_addr"), "{err}");
    }

    #[test]
    fn seed_flag_wins_and_propagates() {
        let config = r#"{
            "seed": 5,
            "train": {
                "model": {"kind": "lstm", "encoder": {"kind": "dense_mlp", "input_dim": 4, "output_dim": 8}},
                "task": {"kind": "uniform", "set_size": 5, "query_count": 5,
                         "source": {"kind": "synthetic_clusters", "classes": 2, "dim": 4, "noise": 0.1,
                                     "items_per_class": 20, "seed": 1}},
                "max_steps": 1
            }
        }"#;
        let (parsed, _) = parse_config_str(config, &[], Some(42)).unwrap();
        assert_eq!(parsed.seed, 42);
        assert_eq!(parsed.train.unwrap().seed, 42);
    }
}
