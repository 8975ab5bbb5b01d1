//! Behavioral properties of the LSTM and Memory-Network baselines.

use nbf_core::baselines::{
    BaselineError, LstmConfig, LstmFamiliarityModel, MemNetConfig, MemNetFamiliarityModel,
};
use nbf_core::diffcore::{finite_diff_check, Array, ParamStore, Tape, GRAD_CHECK_EPS};
use nbf_core::item::Item;
use nbf_core::nbf::EncoderSpec;
use nbf_core::rng;

fn dense_encoder() -> EncoderSpec {
    EncoderSpec::DenseMlp {
        input_dim: 5,
        hidden: 8,
        output_dim: 4,
    }
}

fn lstm_model() -> LstmFamiliarityModel {
    LstmFamiliarityModel::new(LstmConfig {
        hidden: 6,
        encoder: dense_encoder(),
        head_hidden: 8,
        max_unroll: 1000,
    })
}

fn random_item(r: &mut rand_chacha::ChaCha12Rng) -> Item {
    Item::Vector((0..5).map(|_| rng::uniform(r) * 2.0 - 1.0).collect())
}

fn zeroed(store: &ParamStore) -> ParamStore {
    let mut out = store.clone();
    for (_, array) in out.iter_mut() {
        array.values_mut().fill(0.0);
    }
    out
}

#[test]
fn zero_weight_lstm_produces_zero_state() {
    let model = lstm_model();
    let store = zeroed(&model.init_params(1));
    let mut r = rng::chacha(2, 0);
    let items: Vec<Item> = (0..4).map(|_| random_item(&mut r)).collect();
    let state = model.write_set(&store, &items, false).unwrap();
    assert!(state.hidden.iter().all(|&v| v == 0.0));
    assert!(state.cell.iter().all(|&v| v == 0.0));
    assert_eq!(state.value_count(), 12);
}

#[test]
fn lstm_state_depends_on_input_order() {
    let model = lstm_model();
    let store = model.init_params(3);
    let mut r = rng::chacha(4, 0);
    let a = random_item(&mut r);
    let b = random_item(&mut r);
    let fwd = model
        .write_set(&store, &[a.clone(), b.clone()], false)
        .unwrap();
    let rev = model.write_set(&store, &[b, a], false).unwrap();
    assert_ne!(fwd, rev, "distinct orders should give distinct states");
}

#[test]
fn unroll_limit_is_enforced_without_override() {
    let model = LstmFamiliarityModel::new(LstmConfig {
        hidden: 3,
        encoder: dense_encoder(),
        head_hidden: 4,
        max_unroll: 10,
    });
    let store = model.init_params(5);
    let mut r = rng::chacha(6, 0);
    let items: Vec<Item> = (0..15).map(|_| random_item(&mut r)).collect();
    match model.write_set(&store, &items, false) {
        Err(BaselineError::UnrollTooLong { len: 15, max: 10 }) => {}
        other => panic!("expected unroll refusal, got {other:?}"),
    }
    assert!(model.write_set(&store, &items, true).is_ok());
    assert!(matches!(
        model.write_set(&store, &[], false),
        Err(BaselineError::EmptySequence)
    ));
}

#[test]
fn lstm_query_is_deterministic_and_matches_tape() {
    let model = lstm_model();
    let store = model.init_params(7);
    let mut r = rng::chacha(8, 0);
    let items: Vec<Item> = (0..3).map(|_| random_item(&mut r)).collect();
    let query = random_item(&mut r);

    let state = model.write_set(&store, &items, false).unwrap();
    let l1 = model.query(&store, &state, &query).unwrap();
    let l2 = model.query(&store, &state, &query).unwrap();
    assert_eq!(l1, l2);

    let mut tape = Tape::new();
    let state_nodes = model.write_graph(&mut tape, &store, &items, false).unwrap();
    let logit = model
        .query_graph(&mut tape, &store, state_nodes, &query)
        .unwrap();
    assert_eq!(tape.value(logit).values()[0], l1);
}

#[test]
fn lstm_episode_gradient_passes_finite_differences() {
    let model = lstm_model();
    let store = model.init_params(9);
    let mut r = rng::chacha(10, 0);
    let storage: Vec<Item> = (0..3).map(|_| random_item(&mut r)).collect();
    let queries: Vec<Item> = (0..3).map(|_| random_item(&mut r)).collect();
    let labels = vec![1.0, 0.0, 1.0];

    for name in ["cell.w_i", "head.w1", "enc.w2"] {
        let run = |probe: &Array| {
            let mut local = store.clone();
            local.insert(name, probe.clone());
            let mut tape = Tape::new();
            let (loss, _) = model
                .episode_graph(&mut tape, &local, &storage, &queries, &labels, false)
                .unwrap();
            (tape, loss)
        };
        let x0 = store.get(name).unwrap().clone();
        let (tape, loss) = run(&x0);
        let grads = tape.backward(loss).unwrap();
        let analytic = grads.param(name).unwrap().clone();
        let err = finite_diff_check(
            |probe| {
                let (tape, loss) = run(probe);
                tape.value(loss).item()
            },
            &x0,
            &analytic,
            GRAD_CHECK_EPS,
        )
        .unwrap();
        assert!(err < 1e-4, "{name}: err = {err}");
    }
}

#[test]
fn memnet_stores_one_row_per_item_and_ignores_order() {
    let model = MemNetFamiliarityModel::new(MemNetConfig {
        encoder: dense_encoder(),
    });
    let store = model.init_params(11);
    let mut r = rng::chacha(12, 0);
    let items: Vec<Item> = (0..6).map(|_| random_item(&mut r)).collect();
    let memory = model.write_set(&store, &items).unwrap();
    assert_eq!(memory.len(), 6);
    assert_eq!(memory.value_count(), 6 * 4);

    let reversed: Vec<Item> = items.iter().rev().cloned().collect();
    let memory_rev = model.write_set(&store, &reversed).unwrap();
    let query = random_item(&mut r);
    assert_eq!(
        model.query(&store, &memory, &query).unwrap(),
        model.query(&store, &memory_rev, &query).unwrap()
    );
}

#[test]
fn memnet_duplicates_do_not_change_the_answer() {
    let model = MemNetFamiliarityModel::new(MemNetConfig {
        encoder: dense_encoder(),
    });
    let store = model.init_params(13);
    let mut r = rng::chacha(14, 0);
    let items: Vec<Item> = (0..4).map(|_| random_item(&mut r)).collect();
    let mut with_dup = items.clone();
    with_dup.push(items[0].clone());
    let memory = model.write_set(&store, &items).unwrap();
    let memory_dup = model.write_set(&store, &with_dup).unwrap();
    assert_eq!(memory_dup.len(), 5);
    let query = random_item(&mut r);
    assert_eq!(
        model.query(&store, &memory, &query).unwrap(),
        model.query(&store, &memory_dup, &query).unwrap()
    );
}

#[test]
fn memnet_self_query_has_unit_similarity() {
    let model = MemNetFamiliarityModel::new(MemNetConfig {
        encoder: dense_encoder(),
    });
    let store = model.init_params(15);
    let mut r = rng::chacha(16, 0);
    let items: Vec<Item> = (0..5).map(|_| random_item(&mut r)).collect();
    let memory = model.write_set(&store, &items).unwrap();
    for item in &items {
        let maxsim = model.max_similarity(&store, &memory, item).unwrap();
        assert!((maxsim - 1.0).abs() < 1e-6, "self similarity {maxsim}");
    }
}

#[test]
fn memnet_empty_memory_is_an_error() {
    let model = MemNetFamiliarityModel::new(MemNetConfig {
        encoder: dense_encoder(),
    });
    let store = model.init_params(17);
    let memory = model.write_set(&store, &[]).unwrap();
    let mut r = rng::chacha(18, 0);
    assert!(matches!(
        model.query(&store, &memory, &random_item(&mut r)),
        Err(BaselineError::EmptyMemory)
    ));
}

#[test]
fn memnet_episode_gradient_passes_finite_differences() {
    let model = MemNetFamiliarityModel::new(MemNetConfig {
        encoder: dense_encoder(),
    });
    let store = model.init_params(19);
    let mut r = rng::chacha(20, 0);
    let storage: Vec<Item> = (0..3).map(|_| random_item(&mut r)).collect();
    // Queries distinct from storage keep the max away from ties.
    let queries: Vec<Item> = (0..3).map(|_| random_item(&mut r)).collect();
    let labels = vec![0.0, 1.0, 0.0];

    for name in ["enc.w1", "sim.alpha", "sim.beta"] {
        let run = |probe: &Array| {
            let mut local = store.clone();
            local.insert(name, probe.clone());
            let mut tape = Tape::new();
            let (loss, _) = model
                .episode_graph(&mut tape, &local, &storage, &queries, &labels)
                .unwrap();
            (tape, loss)
        };
        let x0 = store.get(name).unwrap().clone();
        let (tape, loss) = run(&x0);
        let grads = tape.backward(loss).unwrap();
        let analytic = grads.param(name).unwrap().clone();
        let err = finite_diff_check(
            |probe| {
                let (tape, loss) = run(probe);
                tape.value(loss).item()
            },
            &x0,
            &analytic,
            GRAD_CHECK_EPS,
        )
        .unwrap();
        assert!(err < 1e-4, "{name}: err = {err}");
    }
}

#[test]
fn memnet_tape_query_matches_fast_query() {
    let model = MemNetFamiliarityModel::new(MemNetConfig {
        encoder: dense_encoder(),
    });
    let store = model.init_params(21);
    let mut r = rng::chacha(22, 0);
    let storage: Vec<Item> = (0..4).map(|_| random_item(&mut r)).collect();
    let queries: Vec<Item> = (0..2).map(|_| random_item(&mut r)).collect();
    let labels = vec![0.0, 1.0];

    let mut tape = Tape::new();
    let (_, logits) = model
        .episode_graph(&mut tape, &store, &storage, &queries, &labels)
        .unwrap();
    let memory = model.write_set(&store, &storage).unwrap();
    for (i, q) in queries.iter().enumerate() {
        let fast = model.query(&store, &memory, q).unwrap();
        let taped = tape.value(logits).values()[i];
        assert!(
            (fast - taped).abs() < 1e-12,
            "query {i}: fast {fast} vs tape {taped}"
        );
    }
}
