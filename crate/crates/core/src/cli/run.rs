//! Command execution: wiring configs to training, evaluation, sweeps,
//! benchmarks, and data generation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::diffcore::ParamStore;
use crate::evalbench::{
    build_composite, calibrate_threshold, curve_to_csv, measure_fpr_fnr, space_curve,
    timing_bench, timing_to_csv, total_space, BenchArtifact, CalibratedModel,
    MIN_VALIDATION_NEGATIVES,
};
use crate::item::Item;
use crate::metatrain::{log_to_csv, sweep, sweep_to_csv, train, train_eval_sources, AnyModel};
use crate::tasks::{sample_episode, DatasetManifest, DatasetSource, Episode, TaskSpec};

use super::config::{ModelEntry, WorkbenchConfig};
use super::CliError;

/// Checkpoint entry holding the frozen sphering projection alongside the
/// trainable parameters.
const ZCA_AUX_NAME: &str = "aux.zca_theta";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Train,
    Eval,
    Sweep,
    Bench,
    Compare,
    GenData,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Eval => "eval",
            Command::Sweep => "sweep",
            Command::Bench => "bench",
            Command::Compare => "compare",
            Command::GenData => "gen-data",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunContext {
    pub out_dir: PathBuf,
    pub workers: usize,
}

/// Enough to reproduce the run exactly: seed, config hash, tool version.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    pub tool_version: String,
    pub workers: usize,
    pub artifacts: Vec<String>,
    pub resolved_config: WorkbenchConfig,
}

/// Atomic write: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(parent)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", parent.display())))?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Runtime(format!("cannot rename into {}: {e}", path.display())))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

fn section<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    section
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("config has no {name:?} section")))
}

/// Save trainable parameters plus the frozen ZCA projection.
fn save_model(path: &Path, model: &AnyModel, params: &ParamStore) -> Result<(), CliError> {
    let mut augmented = params.clone();
    if let AnyModel::Nbf(nbf) = model {
        if nbf.zca().enabled() {
            augmented.insert(ZCA_AUX_NAME, nbf.zca().projection().clone());
        }
    }
    let mut buf = Vec::new();
    augmented
        .save(&mut buf)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    atomic_write(path, &buf)
}

/// Rebuild a model from its config and optional checkpoint. Fixed address
/// matrices regenerate from the seed; the sphering projection restores from
/// the checkpoint's aux entry.
fn load_model(entry: &ModelEntry, seed: u64) -> Result<(AnyModel, ParamStore), CliError> {
    let mut model =
        AnyModel::from_config(&entry.model, seed).map_err(|e| CliError::Config(e.to_string()))?;
    model.set_training(false);
    let params = match &entry.checkpoint {
        Some(path) => {
            let path = Path::new(path);
            if !path.exists() {
                return Err(CliError::Data(format!(
                    "checkpoint not found: {}",
                    path.display()
                )));
            }
            let mut params = ParamStore::load_from_path(path)
                .map_err(|e| CliError::Data(e.to_string()))?;
            if params.contains(ZCA_AUX_NAME) {
                let theta = params.get(ZCA_AUX_NAME).expect("checked").clone();
                if let AnyModel::Nbf(nbf) = &mut model {
                    nbf.zca_mut().set_projection(theta);
                }
                params = strip_aux(params);
            }
            params
        }
        None => model.init_params(seed.wrapping_add(1)),
    };
    Ok((model, params))
}

fn strip_aux(params: ParamStore) -> ParamStore {
    let mut clean = ParamStore::new();
    for (name, array) in params.iter() {
        if !name.starts_with("aux.") {
            clean.insert(name.clone(), array.clone());
        }
    }
    clean
}

/// Sample eval-side episodes until the calibration floor of negative
/// queries is met.
fn validation_episodes(
    task: &TaskSpec,
    source: &DatasetSource,
    seed: u64,
) -> Result<Vec<Episode>, CliError> {
    let mut episodes = Vec::new();
    let mut negatives = 0usize;
    let mut r = crate::rng::chacha(seed ^ 0xca1b, 0);
    while negatives < MIN_VALIDATION_NEGATIVES {
        let episode =
            sample_episode(&mut r, task, source).map_err(|e| CliError::Data(e.to_string()))?;
        negatives += episode.labels.iter().filter(|&&l| !l).count();
        episodes.push(episode);
        if episodes.len() > 1_000_000 {
            return Err(CliError::Runtime(
                "task yields no negative queries; cannot calibrate".to_string(),
            ));
        }
    }
    Ok(episodes)
}

fn calibrated_entry(
    entry: &ModelEntry,
    task: &TaskSpec,
    eval_source: &DatasetSource,
    alpha: f64,
    precision_bits: u32,
    seed: u64,
    allow_long_unroll: bool,
) -> Result<CalibratedModel, CliError> {
    let (model, params) = load_model(entry, seed)?;
    let tau = match entry.tau {
        Some(tau) => tau,
        None => {
            let validation = validation_episodes(task, eval_source, seed)?;
            calibrate_threshold(&model, &params, &validation, alpha / 2.0, allow_long_unroll)
                .map_err(|e| CliError::Runtime(e.to_string()))?
        }
    };
    let mut calibrated = CalibratedModel::new(model, params, tau, precision_bits)
        .map_err(|e| CliError::Config(e.to_string()))?;
    calibrated.allow_long_unroll = allow_long_unroll;
    Ok(calibrated)
}

fn manifest(
    command: Command,
    config: &WorkbenchConfig,
    hash: &str,
    ctx: &RunContext,
    artifacts: &[&str],
) -> RunManifest {
    RunManifest {
        command: command.name().to_string(),
        seed: config.seed,
        config_hash: hash.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        workers: ctx.workers,
        artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
        resolved_config: config.clone(),
    }
}

/// Dispatch one command; artifacts land in the output directory.
pub fn run_command(
    command: Command,
    config: &WorkbenchConfig,
    hash: &str,
    ctx: &RunContext,
) -> Result<(), CliError> {
    std::fs::create_dir_all(&ctx.out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create output dir: {e}")))?;
    match command {
        Command::Train => run_train(config, hash, ctx),
        Command::Eval => run_eval(config, hash, ctx),
        Command::Sweep => run_sweep(config, hash, ctx),
        Command::Bench => run_bench(config, hash, ctx),
        Command::Compare => run_compare(config, hash, ctx),
        Command::GenData => run_gen_data(config, hash, ctx),
    }
}

fn run_train(config: &WorkbenchConfig, hash: &str, ctx: &RunContext) -> Result<(), CliError> {
    let mut train_config = section(&config.train, "train")?.clone();
    if ctx.workers > 1 {
        train_config.workers = ctx.workers;
    }
    let artifacts = ["checkpoint.nbf", "train_log.csv", "manifest.json"];
    write_json(
        &ctx.out_dir.join("manifest.json"),
        &manifest(Command::Train, config, hash, ctx, &artifacts),
    )?;
    let outcome = train(train_config).map_err(|e| CliError::Runtime(e.to_string()))?;
    save_model(
        &ctx.out_dir.join("checkpoint.nbf"),
        &outcome.model,
        &outcome.params,
    )?;
    atomic_write(
        &ctx.out_dir.join("train_log.csv"),
        log_to_csv(&outcome.log).as_bytes(),
    )?;
    Ok(())
}

fn run_eval(config: &WorkbenchConfig, hash: &str, ctx: &RunContext) -> Result<(), CliError> {
    let eval = section(&config.eval, "eval")?;
    let artifacts = ["space_report.json", "manifest.json"];
    write_json(
        &ctx.out_dir.join("manifest.json"),
        &manifest(Command::Eval, config, hash, ctx, &artifacts),
    )?;

    let (_, eval_source) = train_eval_sources(&eval.task, eval.test_fraction, config.seed)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let calibrated = calibrated_entry(
        &eval.entry,
        &eval.task,
        &eval_source,
        eval.alpha,
        eval.precision_bits,
        config.seed,
        eval.allow_long_unroll,
    )?;

    // Measured rates over the query budget.
    let per_episode = eval.task.query_count.max(1);
    let episode_count = eval.query_budget.div_ceil(per_episode);
    let mut r = crate::rng::chacha(config.seed ^ 0xe7a1, 1);
    let episodes: Vec<Episode> = (0..episode_count)
        .map(|_| sample_episode(&mut r, &eval.task, &eval_source))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Data(e.to_string()))?;
    let rates = measure_fpr_fnr(&calibrated, &episodes, eval.query_budget)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    // Space accounting on a representative stored set.
    let composite = build_composite(
        &calibrated,
        &episodes[0].storage,
        eval.alpha / 2.0,
        config.seed,
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut report = total_space(
        &composite,
        eval.entry.model.kind_name(),
        eval.precision_bits,
        eval.alpha,
        Some(rates.fpr),
        Some(rates.fpr_ci),
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    report.model_kind = eval.entry.name.clone();

    let summary = json!({
        "report": report,
        "tau": calibrated.tau,
        "fnr": rates.fnr,
        "fnr_ci": rates.fnr_ci,
        "fpr": rates.fpr,
        "fpr_ci": rates.fpr_ci,
        "queries": rates.positives + rates.negatives,
    });
    write_json(&ctx.out_dir.join("space_report.json"), &summary)?;
    Ok(())
}

fn run_sweep(config: &WorkbenchConfig, hash: &str, ctx: &RunContext) -> Result<(), CliError> {
    let sweep_config = section(&config.sweep, "sweep")?;
    let artifacts = ["sweep_results.csv", "best_config.json", "manifest.json"];
    write_json(
        &ctx.out_dir.join("manifest.json"),
        &manifest(Command::Sweep, config, hash, ctx, &artifacts),
    )?;
    let result = sweep(
        &sweep_config.base,
        &sweep_config.grid,
        sweep_config.alpha,
        sweep_config.precision_bits,
        sweep_config.eval_episodes,
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    atomic_write(
        &ctx.out_dir.join("sweep_results.csv"),
        sweep_to_csv(&result.rows).as_bytes(),
    )?;
    write_json(
        &ctx.out_dir.join("best_config.json"),
        &json!({ "label": result.best.label, "config": result.best.config }),
    )?;
    Ok(())
}

fn run_bench(config: &WorkbenchConfig, hash: &str, ctx: &RunContext) -> Result<(), CliError> {
    let bench = section(&config.bench, "bench")?;
    let artifacts = ["timing.csv", "timing_summary.json", "manifest.json"];
    write_json(
        &ctx.out_dir.join("manifest.json"),
        &manifest(Command::Bench, config, hash, ctx, &artifacts),
    )?;

    let source = DatasetSource::from_spec(&bench.task.source)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let items: Vec<Item> = source.items().iter().take(20_000).cloned().collect();
    let half = items.len() / 2;
    let (stored_pool, query_pool) = items.split_at(half.max(1));

    let loaded: Vec<(String, CalibratedModel)> = bench
        .models
        .iter()
        .map(|entry| {
            let (model, params) = load_model(entry, config.seed)?;
            let calibrated = CalibratedModel::new(model, params, entry.tau.unwrap_or(0.0), 32)
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok((entry.name.clone(), calibrated))
        })
        .collect::<Result<_, CliError>>()?;

    let mut artifacts_list: Vec<(String, BenchArtifact)> = Vec::new();
    if bench.classical {
        artifacts_list.push((
            "bloom".to_string(),
            BenchArtifact::Bloom {
                epsilon: bench.alpha,
                seed: config.seed,
            },
        ));
        artifacts_list.push((
            "cuckoo".to_string(),
            BenchArtifact::Cuckoo {
                epsilon: bench.alpha,
                seed: config.seed,
            },
        ));
    }
    for (name, calibrated) in &loaded {
        artifacts_list.push((name.clone(), BenchArtifact::Neural(calibrated)));
    }

    let rows = timing_bench(
        &artifacts_list,
        stored_pool,
        query_pool,
        &bench.batch_sizes,
        bench.repeats,
        ctx.workers,
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    atomic_write(&ctx.out_dir.join("timing.csv"), timing_to_csv(&rows).as_bytes())?;
    write_json(
        &ctx.out_dir.join("timing_summary.json"),
        &json!({ "workers": ctx.workers, "rows": rows }),
    )?;
    Ok(())
}

fn run_compare(config: &WorkbenchConfig, hash: &str, ctx: &RunContext) -> Result<(), CliError> {
    let compare = section(&config.compare, "compare")?;
    let artifacts = ["space_curve.csv", "manifest.json"];
    write_json(
        &ctx.out_dir.join("manifest.json"),
        &manifest(Command::Compare, config, hash, ctx, &artifacts),
    )?;

    let (_, eval_source) = train_eval_sources(&compare.task, compare.test_fraction, config.seed)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let calibrated: Vec<(String, CalibratedModel)> = compare
        .models
        .iter()
        .map(|entry| {
            let model = calibrated_entry(
                entry,
                &compare.task,
                &eval_source,
                compare.alpha,
                compare.precision_bits,
                config.seed,
                false,
            )?;
            Ok((entry.name.clone(), model))
        })
        .collect::<Result<_, CliError>>()?;
    let refs: Vec<(&str, &CalibratedModel)> = calibrated
        .iter()
        .map(|(name, model)| (name.as_str(), model))
        .collect();
    let rows = space_curve(
        &refs,
        &compare.task,
        &eval_source,
        &compare.set_sizes,
        compare.alpha,
        compare.episodes_per_size,
        config.seed,
    )
    .map_err(|e| CliError::Runtime(e.to_string()))?;
    atomic_write(&ctx.out_dir.join("space_curve.csv"), curve_to_csv(&rows).as_bytes())?;
    Ok(())
}

fn run_gen_data(config: &WorkbenchConfig, hash: &str, ctx: &RunContext) -> Result<(), CliError> {
    let gen = section(&config.gen_data, "gen_data")?;
    let artifacts = ["dataset_manifest.json", "manifest.json"];
    write_json(
        &ctx.out_dir.join("manifest.json"),
        &manifest(Command::GenData, config, hash, ctx, &artifacts),
    )?;
    let source =
        DatasetSource::from_spec(&gen.source).map_err(|e| CliError::Data(e.to_string()))?;
    let dataset_manifest = DatasetManifest::describe(&gen.source, &source);
    write_json(&ctx.out_dir.join("dataset_manifest.json"), &dataset_manifest)?;
    if gen.write_items {
        if source.is_sorted_tokens() {
            let mut text = String::new();
            for item in source.items() {
                text.push_str(std::str::from_utf8(item.as_bytes().expect("token source")).unwrap());
                text.push('\n');
            }
            atomic_write(&ctx.out_dir.join("universe.txt"), text.as_bytes())?;
        } else if let Some(labels) = source.labels() {
            let mut text = String::from("label,values\n");
            for (item, label) in source.items().iter().zip(labels) {
                let values = item
                    .as_vector()
                    .expect("labelled source")
                    .iter()
                    .map(|v| format!("{v:?}"))
                    .collect::<Vec<_>>()
                    .join(";");
                text.push_str(&format!("{label},{values}\n"));
            }
            atomic_write(&ctx.out_dir.join("clusters.csv"), text.as_bytes())?;
        }
    }
    Ok(())
}
