//! Measurement-harness properties: calibration, rate measurement, composite
//! guarantees, and space accounting.

use nbf_core::diffcore::{Array, ParamStore};
use nbf_core::evalbench::{
    build_composite, calibrate_threshold, measure_fpr_fnr, param_count, space_curve,
    timing_bench, total_space, BenchArtifact, CalibratedModel, ClassicalBloom, EvalError,
};
use nbf_core::filters::{analytical_fpr, bloom_size_for};
use nbf_core::item::Item;
use nbf_core::metatrain::{AnyModel, ModelConfig};
use nbf_core::nbf::{AddressMode, EncoderSpec, NBFConfig, SpheringCfgSerde};
use nbf_core::rng;
use nbf_core::tasks::{sample_episode, DatasetSource, Episode, SourceSpec, TaskKind, TaskSpec};

fn token_task(n: usize, t: usize) -> (TaskSpec, DatasetSource) {
    let spec = TaskSpec {
        kind: TaskKind::Uniform,
        set_size: n,
        query_count: t,
        positive_fraction: Some(0.5),
        decay: 0.999,
        source: SourceSpec::SyntheticTokens {
            count: 2000,
            seed: 31,
        },
    };
    let source = DatasetSource::from_spec(&spec.source).unwrap();
    (spec, source)
}

fn episodes(spec: &TaskSpec, source: &DatasetSource, count: usize, seed: u64) -> Vec<Episode> {
    let mut r = rng::chacha(seed, 0);
    (0..count)
        .map(|_| sample_episode(&mut r, spec, source).unwrap())
        .collect()
}

/// Untrained token-modality model; its logits are arbitrary but
/// deterministic, which is all calibration needs.
fn untrained_model(seed: u64) -> (AnyModel, ParamStore) {
    let config = ModelConfig::Nbf(NBFConfig {
        m_slots: 6,
        d_w: 2,
        d_q: 6,
        address_mode: AddressMode::GaussianFixed,
        k_addr: 0,
        sphering: SpheringCfgSerde::default(),
        encoder: EncoderSpec::TrigramMlp {
            hash_dim: 64,
            hidden: 16,
            output_dim: 8,
        },
        head_hidden: 16,
        out_hidden: None,
    });
    let model = AnyModel::from_config(&config, seed).unwrap();
    let params = model.init_params(seed + 1);
    (model, params)
}

fn zero_logit_model() -> (AnyModel, ParamStore) {
    let (model, mut params) = untrained_model(999);
    for (_, array) in params.iter_mut() {
        array.values_mut().fill(0.0);
    }
    (model, params)
}

#[test]
fn calibrated_threshold_holds_its_rate_on_fresh_queries() {
    let (spec, source) = token_task(12, 40);
    let (model, params) = untrained_model(41);
    let validation = episodes(&spec, &source, 600, 42); // ~12k negatives
    let epsilon = 0.1;
    let tau = calibrate_threshold(&model, &params, &validation, epsilon, false).unwrap();

    let calibrated = CalibratedModel::new(model, params, tau, 32).unwrap();
    let fresh = episodes(&spec, &source, 300, 43);
    let rates = measure_fpr_fnr(&calibrated, &fresh, 12_000).unwrap();
    // Wilson 99% interval of the fresh measurement should cover epsilon.
    assert!(
        rates.fpr_ci.0 <= epsilon && epsilon <= rates.fpr_ci.1,
        "fpr {} with CI {:?} does not cover {epsilon}",
        rates.fpr,
        rates.fpr_ci
    );
}

#[test]
fn too_few_validation_negatives_is_an_error() {
    let (spec, source) = token_task(12, 40);
    let (model, params) = untrained_model(44);
    let validation = episodes(&spec, &source, 5, 45);
    match calibrate_threshold(&model, &params, &validation, 0.1, false) {
        Err(EvalError::NotEnoughValidation { need, .. }) => assert_eq!(need, 10_000),
        other => panic!("expected validation floor error, got {other:?}"),
    }
}

#[test]
fn constant_decision_models_have_extreme_rates() {
    let (spec, source) = token_task(10, 50);
    let eps = episodes(&spec, &source, 30, 46);
    let (model, params) = zero_logit_model();

    let always_yes = CalibratedModel::new(model.clone(), params.clone(), -1.0, 32).unwrap();
    let rates = measure_fpr_fnr(&always_yes, &eps, 1000).unwrap();
    assert_eq!(rates.fpr, 1.0);
    assert_eq!(rates.fnr, 0.0);

    let always_no = CalibratedModel::new(model, params, 1.0, 32).unwrap();
    let rates = measure_fpr_fnr(&always_no, &eps, 1000).unwrap();
    assert_eq!(rates.fpr, 0.0);
    assert_eq!(rates.fnr, 1.0);
}

#[test]
fn bloom_artifact_measures_zero_fnr_and_analytical_fpr() {
    let (spec, source) = token_task(400, 200);
    let eps = episodes(&spec, &source, 300, 47);
    let artifact = ClassicalBloom {
        epsilon: 0.05,
        seed: 48,
    };
    let rates = measure_fpr_fnr(&artifact, &eps, 50_000).unwrap();
    assert_eq!(rates.fnr, 0.0);
    let (m, k) = bloom_size_for(400, 0.05).unwrap();
    let expected = analytical_fpr(m, 400, k);
    assert!(
        rates.fpr_ci.0 <= expected && expected <= rates.fpr_ci.1,
        "fpr {} CI {:?} vs analytical {expected}",
        rates.fpr,
        rates.fpr_ci
    );
}

#[test]
fn composite_never_rejects_stored_items_whatever_the_model() {
    let (spec, source) = token_task(40, 20);
    let eps = episodes(&spec, &source, 5, 49);
    let (model, params) = zero_logit_model();
    // reject-everything model: every stored item lands in the backup
    let always_no = CalibratedModel::new(model.clone(), params.clone(), 1.0, 32).unwrap();
    for ep in &eps {
        let composite = build_composite(&always_no, &ep.storage, 0.005, 50).unwrap();
        assert_eq!(composite.n_false_negatives(), ep.storage.len());
        for item in &ep.storage {
            assert!(composite.query(item).unwrap());
        }
        // backup sized as a full filter over the set
        let (expected_bits, _) = bloom_size_for(ep.storage.len(), 0.005).unwrap();
        assert_eq!(composite.backup_bits(), expected_bits);
    }

    // accept-everything model: minimal one-element backup
    let always_yes = CalibratedModel::new(model, params, -1.0, 32).unwrap();
    let composite = build_composite(&always_yes, &eps[0].storage, 0.005, 51).unwrap();
    assert_eq!(composite.n_false_negatives(), 0);
    let (floor_bits, _) = bloom_size_for(1, 0.005).unwrap();
    assert_eq!(composite.backup_bits(), floor_bits);
    assert_eq!(
        composite.total_bits(),
        composite.state_bits() + floor_bits
    );
}

#[test]
fn space_report_arithmetic_is_exact() {
    let (spec, source) = token_task(10, 10);
    let ep = &episodes(&spec, &source, 1, 52)[0];
    let (model, params) = zero_logit_model();
    let always_no = CalibratedModel::new(model, params, 1.0, 32).unwrap();
    let alpha = 0.02;
    let composite = build_composite(&always_no, &ep.storage, alpha / 2.0, 53).unwrap();
    let report = total_space(&composite, "nbf", 32, alpha, None, None).unwrap();

    assert_eq!(report.n_false_negatives, 10);
    // backup for 10 misses at delta = 0.01 is ceil(10 * 9.585...) = 96 bits
    let (expected_backup, _) = bloom_size_for(10, 0.01).unwrap();
    assert_eq!(expected_backup, 96);
    assert_eq!(report.backup_bits, 96);
    assert_eq!(report.state_bits, report.state_values as u64 * 32);
    assert_eq!(report.total_bits, report.state_bits + report.backup_bits);
}

#[test]
fn bloom_comparison_row_matches_published_sizing() {
    let (spec, source) = token_task(10, 10);
    let ep = &episodes(&spec, &source, 1, 54)[0];
    let (model, params) = zero_logit_model();
    let always_yes = CalibratedModel::new(model, params, -1.0, 32).unwrap();
    let composite = build_composite(&always_yes, &ep.storage, 0.005, 55).unwrap();
    let report = total_space(&composite, "nbf", 32, 0.01, None, None).unwrap();
    // comparison row is computed for the stored count; check the formula path
    assert_eq!(report.bloom_bits, bloom_size_for(10, 0.01).unwrap().0);

    // and the published 5000-element point lands within 1% of 47.9 kb
    let (m, _) = bloom_size_for(5000, 0.01).unwrap();
    assert!((m as f64 - 47_900.0).abs() / 47_900.0 < 0.01);
}

#[test]
fn bloom_space_curve_grows_at_the_formula_slope() {
    let (spec, source) = token_task(100, 50);
    let rows = space_curve(&[], &spec, &source, &[100, 200], 0.01, 1, 56).unwrap();
    let bloom: Vec<_> = rows.iter().filter(|r| r.model == "bloom").collect();
    assert_eq!(bloom.len(), 2);
    let slope = (bloom[1].total_bits - bloom[0].total_bits) / 100.0;
    assert!((slope - 9.585).abs() < 0.02, "slope {slope}");
    assert!(rows.iter().any(|r| r.model == "cuckoo"));
}

#[test]
fn extrapolation_rows_keep_composite_fnr_zero() {
    let mut spec = TaskSpec {
        kind: TaskKind::DatabaseRange,
        set_size: 20,
        query_count: 30,
        positive_fraction: Some(0.5),
        decay: 0.999,
        source: SourceSpec::SyntheticTokens {
            count: 3000,
            seed: 57,
        },
    };
    let source = DatasetSource::from_spec(&spec.source).unwrap();
    spec.set_size = 20;
    let (model, params) = untrained_model(58);
    let calibrated = CalibratedModel::new(model, params, 0.0, 32).unwrap();
    let rows = nbf_core::evalbench::extrapolation_curve(
        &calibrated,
        &spec,
        &source,
        &[20, 25, 30],
        0.01,
        3,
        59,
    )
    .unwrap();
    assert_eq!(rows.len(), 3);
    for row in &rows {
        assert_eq!(row.composite_fnr, 0.0, "composite FNR at n={}", row.n);
        assert!(row.total_bits > 0.0);
    }
}

#[test]
fn param_count_is_exact_and_ignores_memory() {
    let mut params = ParamStore::new();
    params.insert("w", Array::zeros(vec![1, 128]));
    params.insert("b", Array::zeros(vec![1]));
    let (count, bytes) = param_count(&params);
    assert_eq!(count, 129);
    // magic + 2 records of (len, name, rank, dims, values)
    let expected = 4
        + (8 + 1 + 8 + 8 + 8) // "b": rank 1, one dim, one value
        + (8 + 1 + 8 + 16 + 128 * 8); // "w": rank 2, two dims, 128 values
    assert_eq!(bytes, expected as u64);
}

#[test]
fn timing_rows_are_consistent() {
    let (spec, source) = token_task(64, 64);
    let items: Vec<Item> = source.items()[..512].to_vec();
    let queries: Vec<Item> = source.items()[512..1024].to_vec();
    let (model, params) = untrained_model(60);
    let calibrated = CalibratedModel::new(model, params, 0.0, 32).unwrap();
    let artifacts = vec![
        (
            "bloom".to_string(),
            BenchArtifact::Bloom {
                epsilon: 0.01,
                seed: 61,
            },
        ),
        ("nbf".to_string(), BenchArtifact::Neural(&calibrated)),
    ];
    let rows = timing_bench(&artifacts, &items, &queries, &[1, 64], 5, 1).unwrap();
    assert_eq!(rows.len(), artifacts.len() * 2 * 2);
    let _ = spec;
    for row in &rows {
        assert!(row.latency_ms > 0.0, "{row:?}");
        assert!(row.throughput_per_s > 0.0, "{row:?}");
    }
    // batching never hurts amortized cost in this harness
    for artifact in ["bloom", "nbf"] {
        for op in ["insert", "query"] {
            let single = rows
                .iter()
                .find(|r| r.artifact == artifact && r.op == op && r.batch == 1)
                .unwrap();
            let batched = rows
                .iter()
                .find(|r| r.artifact == artifact && r.op == op && r.batch == 64)
                .unwrap();
            assert!(
                batched.throughput_per_s >= 1000.0 / single.latency_ms * 0.8,
                "{artifact}/{op}: batched {} vs 1/latency {}",
                batched.throughput_per_s,
                1000.0 / single.latency_ms
            );
        }
    }
}
