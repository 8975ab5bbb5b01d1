// Scratch: inspect gradient flow on the database task. Not a deliverable.
use nbf_core::metatrain::{AnyModel, ModelConfig, TrainConfig, Trainer};
use nbf_core::nbf::{AddressMode, EncoderSpec, NBFConfig, SpheringCfgSerde};
use nbf_core::tasks::{SourceSpec, TaskKind, TaskSpec};

fn main() {
    let task = TaskSpec {
        kind: TaskKind::DatabaseRange,
        set_size: 100,
        query_count: 100,
        positive_fraction: Some(0.5),
        decay: 0.999,
        source: SourceSpec::SyntheticTokens {
            count: 8000,
            seed: 700,
        },
    };
    let config = TrainConfig {
        model: ModelConfig::Nbf(NBFConfig {
            m_slots: 16,
            d_w: 4,
            d_q: 12,
            address_mode: AddressMode::Trainable,
            k_addr: 0,
            sphering: SpheringCfgSerde::default(),
            encoder: EncoderSpec::TrigramMlp {
                hash_dim: 128,
                hidden: 128,
                output_dim: 24,
            },
            head_hidden: 128,
            out_hidden: Some(64),
        }),
        task,
        learning_rate: 2e-3,
        batch_size: 8,
        max_steps: 10,
        eval_period: 10,
        eval_episodes: 1,
        seed: 700,
        grad_clip: None,
        allow_long_unroll: false,
        test_fraction: 0.2,
        workers: 1,
    };
    let trainer = Trainer::new(config).unwrap();
    let eps = trainer.sample_eval_episodes(1, 0).unwrap();
    let ep = &eps[0];
    let AnyModel::Nbf(model) = trainer.model() else {
        panic!()
    };
    let memory = model.write_set(trainer.params(), &ep.storage).unwrap();
    let mut pos = vec![];
    let mut neg = vec![];
    for (q, &l) in ep.queries.iter().zip(&ep.labels) {
        let logit = model.read(trainer.params(), &memory, q).unwrap();
        if l {
            pos.push(logit)
        } else {
            neg.push(logit)
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!(
        "pos mean {:.4} (n={}), neg mean {:.4} (n={})",
        mean(&pos),
        pos.len(),
        mean(&neg),
        neg.len()
    );
    println!("pos sample {:?}", &pos[..4.min(pos.len())]);
    println!("neg sample {:?}", &neg[..4.min(neg.len())]);
    for item in ep.storage.iter().take(3) {
        let out = model.controller(trainer.params(), item).unwrap();
        let max = out.address.iter().cloned().fold(0.0, f64::max);
        println!("address max {:.3}", max);
    }
    let eval = trainer
        .model()
        .episode_backward(trainer.params(), ep, false)
        .unwrap();
    println!("loss {:.4}", eval.loss);
    for (name, g) in eval.grads.iter() {
        let norm = g.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("  grad {name}: {norm:.6}");
    }
}
