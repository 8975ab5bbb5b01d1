//! Behavioral properties of the Neural Bloom Filter memory.

use nbf_core::diffcore::{finite_diff_check, Array, ParamStore, Tape, GRAD_CHECK_EPS};
use nbf_core::item::Item;
use nbf_core::nbf::{
    memory_utilization, AddressMode, EncoderSpec, MemoryState, NBFConfig, NeuralBloomFilter,
    SpheringCfgSerde,
};
use nbf_core::rng;

fn small_config(address_mode: AddressMode, k_addr: usize, sphering: bool) -> NBFConfig {
    NBFConfig {
        m_slots: 8,
        d_w: 3,
        d_q: 5,
        address_mode,
        k_addr,
        sphering: SpheringCfgSerde {
            enabled: sphering,
            ..Default::default()
        },
        encoder: EncoderSpec::DenseMlp {
            input_dim: 6,
            hidden: 10,
            output_dim: 4,
        },
        head_hidden: 10,
        out_hidden: None,
    }
}

fn random_item(r: &mut rand_chacha::ChaCha12Rng, dim: usize) -> Item {
    Item::Vector((0..dim).map(|_| rng::uniform(r) * 2.0 - 1.0).collect())
}

#[test]
fn fast_and_tape_controllers_agree_bit_for_bit() {
    for (mode, k, sphering) in [
        (AddressMode::Trainable, 0, false),
        (AddressMode::GaussianFixed, 3, true),
        (AddressMode::Seeded, 2, false),
    ] {
        let model = NeuralBloomFilter::new(small_config(mode, k, sphering), 40).unwrap();
        let store = model.init_params(41);
        let mut r = rng::chacha(42, 0);
        let item = random_item(&mut r, 6);

        let mut tape = Tape::new();
        let ctx = model.episode_context(&mut tape, &store).unwrap();
        let nodes = model.controller_graph(&mut tape, &store, ctx, &item).unwrap();
        let fast = model.controller(&store, &item).unwrap();
        assert_eq!(tape.value(nodes.z).values(), fast.z.as_slice());
        assert_eq!(tape.value(nodes.query).values(), fast.query.as_slice());
        assert_eq!(tape.value(nodes.address).values(), fast.address.as_slice());
        assert_eq!(tape.value(nodes.write_word).values(), fast.write_word.as_slice());
    }
}

#[test]
fn address_is_a_simplex_vector_with_sparse_support() {
    let model = NeuralBloomFilter::new(small_config(AddressMode::GaussianFixed, 3, false), 1).unwrap();
    let store = model.init_params(2);
    let mut r = rng::chacha(3, 0);
    for _ in 0..20 {
        let out = model.controller(&store, &random_item(&mut r, 6)).unwrap();
        let sum: f64 = out.address.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9, "address mass {sum}");
        assert!(out.address.iter().all(|&a| a >= 0.0));
        let nonzeros = out.address.iter().filter(|&&a| a != 0.0).count();
        assert!(nonzeros <= 3, "support {nonzeros} > k");
    }
}

#[test]
fn full_k_equals_dense_addressing() {
    let dense = NeuralBloomFilter::new(small_config(AddressMode::GaussianFixed, 0, false), 7).unwrap();
    let sparse_full =
        NeuralBloomFilter::new(small_config(AddressMode::GaussianFixed, 8, false), 7).unwrap();
    let store = dense.init_params(8);
    let mut r = rng::chacha(9, 0);
    for _ in 0..10 {
        let item = random_item(&mut r, 6);
        let a = dense.controller(&store, &item).unwrap().address;
        let b = sparse_full.controller(&store, &item).unwrap().address;
        assert_eq!(a, b);
    }
}

#[test]
fn sphering_disabled_leaves_query_untouched() {
    let model = NeuralBloomFilter::new(small_config(AddressMode::GaussianFixed, 0, false), 7).unwrap();
    let store = model.init_params(8);
    let mut r = rng::chacha(10, 0);
    let out = model.controller(&store, &random_item(&mut r, 6)).unwrap();
    assert_eq!(out.query, out.raw_query);
}

#[test]
fn one_write_equals_the_outer_product() {
    let model = NeuralBloomFilter::new(small_config(AddressMode::GaussianFixed, 0, false), 11).unwrap();
    let store = model.init_params(12);
    let mut r = rng::chacha(13, 0);
    let item = random_item(&mut r, 6);
    let mut memory = MemoryState::zeros(8, 3);
    let out = model.write(&store, &mut memory, &item).unwrap();
    assert_eq!(memory.writes(), 1);
    for slot in 0..8 {
        for j in 0..3 {
            let expected = out.address[slot] * out.write_word[j];
            assert_eq!(memory.matrix().at2(slot, j), expected);
        }
    }
}

#[test]
fn writes_commute_and_reads_are_order_invariant() {
    let model = NeuralBloomFilter::new(small_config(AddressMode::Trainable, 0, false), 14).unwrap();
    let store = model.init_params(15);
    let mut r = rng::chacha(16, 0);
    let items: Vec<Item> = (0..12).map(|_| random_item(&mut r, 6)).collect();
    let queries: Vec<Item> = (0..5).map(|_| random_item(&mut r, 6)).collect();

    let base_memory = model.write_set(&store, &items).unwrap();
    let base_logits: Vec<f64> = queries
        .iter()
        .map(|q| model.read(&store, &base_memory, q).unwrap())
        .collect();

    let mut order: Vec<usize> = (0..items.len()).collect();
    for trial in 0..10u64 {
        // deterministic shuffle per trial
        let mut tr = rng::chacha(17, trial);
        for i in (1..order.len()).rev() {
            order.swap(i, rng::index(&mut tr, i + 1));
        }
        let permuted: Vec<Item> = order.iter().map(|&i| items[i].clone()).collect();
        let memory = model.write_set(&store, &permuted).unwrap();
        assert!(
            memory.relative_distance(&base_memory) < 1e-9,
            "memory moved by {}",
            memory.relative_distance(&base_memory)
        );
        for (q, &base) in queries.iter().zip(base_logits.iter()) {
            let logit = model.read(&store, &memory, q).unwrap();
            assert!(
                (logit - base).abs() < 1e-6,
                "logit {logit} vs {base} under permutation"
            );
        }
    }
}

#[test]
fn parallel_write_matches_serial_write() {
    let model = NeuralBloomFilter::new(small_config(AddressMode::GaussianFixed, 3, false), 18).unwrap();
    let store = model.init_params(19);
    let mut r = rng::chacha(20, 0);
    let items: Vec<Item> = (0..30).map(|_| random_item(&mut r, 6)).collect();
    let serial = model.write_set(&store, &items).unwrap();
    let parallel = model.write_set_parallel(&store, &items).unwrap();
    assert_eq!(serial.matrix().values(), parallel.matrix().values());
}

#[test]
fn write_word_gradient_identity_holds_through_full_backprop() {
    // dL/dw_i = (dL/dM)^T a_i, so writes need no unrolled backward pass.
    let model = NeuralBloomFilter::new(small_config(AddressMode::Trainable, 0, false), 21).unwrap();
    let store = model.init_params(22);
    let mut r = rng::chacha(23, 0);
    let storage: Vec<Item> = (0..6).map(|_| random_item(&mut r, 6)).collect();
    let queries: Vec<Item> = (0..6).map(|_| random_item(&mut r, 6)).collect();
    let labels = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0];

    let mut tape = Tape::new();
    let graph = model
        .episode_graph(&mut tape, &store, &storage, &queries, &labels)
        .unwrap();
    let grads = tape.backward(graph.loss).unwrap();
    let d_memory = grads.wrt(graph.memory).expect("memory receives gradient");

    for write in &graph.writes {
        let a = tape.value(write.address).values();
        let dw_full = grads
            .wrt(write.write_word)
            .expect("write word receives gradient");
        for j in 0..3 {
            let mut closed = 0.0;
            for slot in 0..8 {
                closed += d_memory.at2(slot, j) * a[slot];
            }
            let full = dw_full.values()[j];
            let rel = (closed - full).abs() / (full.abs() + 1e-12);
            assert!(rel < 1e-6, "closed {closed} vs backprop {full}");
        }
    }
}

#[test]
fn episode_loss_gradient_passes_finite_differences() {
    let model = NeuralBloomFilter::new(small_config(AddressMode::Trainable, 0, false), 24).unwrap();
    let store = model.init_params(25);
    let mut r = rng::chacha(26, 0);
    let storage: Vec<Item> = (0..3).map(|_| random_item(&mut r, 6)).collect();
    let queries: Vec<Item> = (0..4).map(|_| random_item(&mut r, 6)).collect();
    let labels = vec![1.0, 0.0, 0.0, 1.0];

    for name in ["enc.w1", "fq.w2", "fw.b2", "fout.w_in", "fout.w_head", "addr.a"] {
        let run = |probe: &Array| {
            let mut local = store.clone();
            local.insert(name, probe.clone());
            let mut tape = Tape::new();
            let graph = model
                .episode_graph(&mut tape, &local, &storage, &queries, &labels)
                .unwrap();
            (tape, graph)
        };
        let x0 = store.get(name).unwrap().clone();
        let (tape, graph) = run(&x0);
        let grads = tape.backward(graph.loss).unwrap();
        let analytic = grads.param(name).unwrap().clone();
        let err = finite_diff_check(
            |probe| {
                let (tape, graph) = run(probe);
                tape.value(graph.loss).item()
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
fn fixed_address_matrices_are_never_touched_by_training() {
    for mode in [AddressMode::GaussianFixed, AddressMode::Seeded] {
        let model = NeuralBloomFilter::new(small_config(mode, 0, false), 27).unwrap();
        let mut store = model.init_params(28);
        assert!(!store.contains("addr.a"));
        let before = model.address_matrix().fixed_rows().unwrap().clone();

        let mut r = rng::chacha(29, 0);
        let storage: Vec<Item> = (0..4).map(|_| random_item(&mut r, 6)).collect();
        let queries: Vec<Item> = (0..4).map(|_| random_item(&mut r, 6)).collect();
        let labels = vec![1.0, 0.0, 1.0, 0.0];
        let mut tape = Tape::new();
        let graph = model
            .episode_graph(&mut tape, &store, &storage, &queries, &labels)
            .unwrap();
        let grads = tape.backward(graph.loss).unwrap();
        let mut adam = nbf_core::diffcore::AdamState::new(
            nbf_core::diffcore::AdamConfig::with_lr(0.01),
        );
        adam.step(&mut store, grads.params()).unwrap();

        assert_eq!(model.address_matrix().fixed_rows().unwrap(), &before);
    }
}

#[test]
fn m_zero_read_depends_only_on_residual_inputs() {
    // Two models sharing all parameters but holding different fixed address
    // matrices produce the same logit when memory is zero: the read word
    // contributes nothing.
    let a = NeuralBloomFilter::new(small_config(AddressMode::GaussianFixed, 0, false), 1).unwrap();
    let b = NeuralBloomFilter::new(small_config(AddressMode::GaussianFixed, 0, false), 2).unwrap();
    assert_ne!(
        a.address_matrix().fixed_rows().unwrap(),
        b.address_matrix().fixed_rows().unwrap()
    );
    let store = a.init_params(3);
    let zero = MemoryState::zeros(8, 3);
    let mut r = rng::chacha(30, 0);
    for _ in 0..5 {
        let item = random_item(&mut r, 6);
        let la = a.read(&store, &zero, &item).unwrap();
        let lb = b.read(&store, &zero, &item).unwrap();
        assert_eq!(la, lb);
    }
}

#[test]
fn top1_read_touches_only_the_selected_slot() {
    let model = NeuralBloomFilter::new(small_config(AddressMode::GaussianFixed, 1, false), 31).unwrap();
    let store = model.init_params(32);
    let mut r = rng::chacha(33, 0);
    let item = random_item(&mut r, 6);
    let out = model.controller(&store, &item).unwrap();
    let selected = out
        .address
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;

    let mut mem_a = MemoryState::zeros(8, 3);
    let mut mem_b = MemoryState::zeros(8, 3);
    for slot in 0..8 {
        for j in 0..3 {
            let v = rng::uniform(&mut r);
            mem_a.matrix_mut().values_mut()[slot * 3 + j] = v;
            // mem_b agrees only on the selected slot
            mem_b.matrix_mut().values_mut()[slot * 3 + j] =
                if slot == selected { v } else { v + 7.0 };
        }
    }
    let la = model.read(&store, &mem_a, &item).unwrap();
    let lb = model.read(&store, &mem_b, &item).unwrap();
    assert_eq!(la, lb);
}

#[test]
fn argmax_slot_histogram_is_uniform_for_gaussian_queries() {
    // Top-1 selection between a Gaussian address matrix and a well-sphered
    // query behaves like a uniform hash marginally over the Gaussian
    // ensemble (any single fixed matrix is skewed by its realized row
    // norms). Draw a fresh (A, q) pair each time; chi-square at
    // significance 0.01 with df = 15 has critical value 30.578.
    let m_slots = 16;
    let d_q = 32;
    let mut r = rng::chacha(5151, 0);
    let draws = 16_000usize;
    let mut counts = vec![0usize; m_slots];
    let mut rows = vec![0.0; m_slots * d_q];
    let mut logits = vec![0.0; m_slots];
    for _ in 0..draws {
        for v in rows.iter_mut() {
            *v = rng::normal(&mut r);
        }
        let q: Vec<f64> = (0..d_q).map(|_| rng::normal(&mut r)).collect();
        nbf_core::diffcore::kernels::matvec(&rows, &q, m_slots, d_q, &mut logits);
        let argmax = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        counts[argmax] += 1;
    }
    let expected = draws as f64 / m_slots as f64;
    let chi2: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    assert!(chi2 < 30.578, "chi-square statistic {chi2}, counts {counts:?}");
}

#[test]
fn utilization_conventions() {
    assert_eq!(memory_utilization(&[]), 0.0);
    let mut one_hot = vec![0.0; 8];
    one_hot[5] = 1.0;
    assert!((memory_utilization(&[one_hot]) - 1.0 / 8.0).abs() < 1e-12);
}

#[test]
fn memory_state_round_trips_through_nbm1() {
    let model = NeuralBloomFilter::new(small_config(AddressMode::Seeded, 2, false), 34).unwrap();
    let store = model.init_params(35);
    let mut r = rng::chacha(36, 0);
    let items: Vec<Item> = (0..10).map(|_| random_item(&mut r, 6)).collect();
    let memory = model.write_set(&store, &items).unwrap();
    let bytes = memory.to_bytes();
    assert_eq!(&bytes[..4], b"NBM1");
    let loaded = MemoryState::from_bytes(&bytes).unwrap();
    assert_eq!(loaded.writes(), memory.writes());
    // payload is float32, so agreement is to single precision
    for (a, b) in memory
        .matrix()
        .values()
        .iter()
        .zip(loaded.matrix().values())
    {
        assert!((a - b).abs() <= (a.abs() + 1.0) * 1e-6);
    }
    assert!(MemoryState::from_bytes(&bytes[..10]).is_err());
}
