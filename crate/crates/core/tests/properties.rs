//! Property tests for the structural invariants.

use proptest::prelude::*;

use nbf_core::diffcore::{kernels, Array, Tape};
use nbf_core::filters::BloomFilter;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Softmax outputs are nonnegative and sum to 1 within 1e-9.
    #[test]
    fn softmax_lands_on_the_simplex(logits in prop::collection::vec(-30.0f64..30.0, 1..40)) {
        let mut out = vec![0.0; logits.len()];
        kernels::softmax(&logits, &mut out);
        prop_assert!(out.iter().all(|&v| v >= 0.0));
        let sum: f64 = out.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9, "sum = {sum}");
    }

    /// Top-k softmax keeps at most k nonzeros, they sum to 1, and k = len
    /// reproduces the dense softmax.
    #[test]
    fn topk_softmax_support_and_degenerate_k(
        logits in prop::collection::vec(-10.0f64..10.0, 2..24),
        k_frac in 0.0f64..1.0,
    ) {
        let k = ((logits.len() as f64 * k_frac) as usize).clamp(1, logits.len());
        let mut sparse = vec![0.0; logits.len()];
        kernels::topk_softmax(&logits, k, &mut sparse);
        let nonzeros = sparse.iter().filter(|&&v| v != 0.0).count();
        prop_assert!(nonzeros <= k);
        let sum: f64 = sparse.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);

        let mut dense = vec![0.0; logits.len()];
        kernels::softmax(&logits, &mut dense);
        let mut full = vec![0.0; logits.len()];
        kernels::topk_softmax(&logits, logits.len(), &mut full);
        for (d, f) in dense.iter().zip(&full) {
            prop_assert!((d - f).abs() < 1e-12);
        }
    }

    /// No false negatives and monotone bit vector for any insert sequence.
    #[test]
    fn bloom_has_no_false_negatives(
        keys in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..24), 1..200),
        seed in any::<u64>(),
    ) {
        let mut filter = BloomFilter::for_config(keys.len(), 0.02, seed).unwrap();
        let mut last_popcount = 0;
        for key in &keys {
            filter.insert(key);
            let pop = filter.popcount();
            prop_assert!(pop >= last_popcount, "popcount decreased");
            last_popcount = pop;
        }
        for key in &keys {
            prop_assert!(filter.query(key));
        }
    }

    /// Replaying a tape reproduces identical outputs.
    #[test]
    fn tape_replay_is_exact(values in prop::collection::vec(-2.0f64..2.0, 4..16)) {
        let mut tape = Tape::new();
        let x = tape.input(Array::vector(values));
        let act = tape.tanh(x).unwrap();
        let sm = tape.softmax(act).unwrap();
        let y = tape.mul(sm, act).unwrap();
        let _ = tape.reduce_sum(y).unwrap();
        let replayed = tape.replay().unwrap();
        for (id, value) in replayed.iter().enumerate() {
            prop_assert_eq!(value.values(), tape.value(id).values());
        }
    }

    /// The double-hash index family stays in range and is seed-stable.
    #[test]
    fn index_family_in_range(
        key in prop::collection::vec(any::<u8>(), 0..32),
        m in 1u64..100_000,
        k in 1u32..32,
        seed in any::<u64>(),
    ) {
        let hasher = nbf_core::filters::KeyedHasher::new(seed);
        let a: Vec<u64> = hasher.index_family(&key, m, k).collect();
        let b: Vec<u64> = hasher.index_family(&key, m, k).collect();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.iter().all(|&i| i < m));
        prop_assert_eq!(a.len(), k as usize);
    }
}
