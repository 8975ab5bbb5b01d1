// Scratch driver for tuning training budgets. Not part of the deliverable.

use nbf_core::evalbench::{calibrate_threshold, extrapolation_curve, CalibratedModel};
use nbf_core::metatrain::{ModelConfig, TrainConfig, Trainer};
use nbf_core::nbf::{memory_utilization, AddressMode, EncoderSpec, NBFConfig, SpheringCfgSerde};
use nbf_core::tasks::{SourceSpec, TaskKind, TaskSpec};

fn database_task() -> TaskSpec {
    TaskSpec {
        kind: TaskKind::DatabaseRange,
        set_size: 100,
        query_count: 60,
        positive_fraction: Some(0.5),
        decay: 0.999,
        source: SourceSpec::SyntheticTokens {
            count: 1250,
            seed: 700,
        },
    }
}

fn criterion7_config(seed: u64) -> TrainConfig {
    TrainConfig {
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
        task: database_task(),
        learning_rate: 1.5e-3,
        batch_size: 8,
        max_steps: 50_000,
        eval_period: 250,
        eval_episodes: 4,
        seed,
        grad_clip: None,
        allow_long_unroll: false,
        test_fraction: 0.2,
        workers: 1,
    }
}

fn class_task() -> TaskSpec {
    TaskSpec {
        kind: TaskKind::ClassBased,
        set_size: 50,
        query_count: 50,
        positive_fraction: Some(0.5),
        decay: 0.999,
        source: SourceSpec::SyntheticClusters {
            classes: 10,
            dim: 16,
            noise: 0.1,
            items_per_class: 320,
            seed: 800,
        },
    }
}

fn criterion8_config(seed: u64, sphering: bool) -> TrainConfig {
    TrainConfig {
        model: ModelConfig::Nbf(NBFConfig {
            m_slots: 32,
            d_w: 2,
            d_q: 12,
            address_mode: AddressMode::GaussianFixed,
            k_addr: 3,
            sphering: SpheringCfgSerde {
                enabled: sphering,
                gamma: 0.99,
                eta: 0.99,
                period: 100,
            },
            encoder: EncoderSpec::DenseMlp {
                input_dim: 16,
                hidden: 128,
                output_dim: 24,
            },
            head_hidden: 128,
            out_hidden: Some(64),
        }),
        task: class_task(),
        learning_rate: 2e-3,
        batch_size: 8,
        max_steps: 50_000,
        eval_period: 250,
        eval_episodes: 4,
        seed,
        grad_clip: None,
        allow_long_unroll: false,
        test_fraction: 0.2,
        workers: 1,
    }
}

fn mean_utilization(trainer: &Trainer, episodes: usize) -> f64 {
    let eps = trainer.sample_eval_episodes(episodes, 0xa11).unwrap();
    let nbf_core::metatrain::AnyModel::Nbf(model) = trainer.model() else {
        panic!("nbf expected")
    };
    let mut total = 0.0;
    for ep in &eps {
        let addresses: Vec<Vec<f64>> = ep
            .storage
            .iter()
            .map(|item| model.controller(trainer.params(), item).unwrap().address)
            .collect();
        total += memory_utilization(&addresses);
    }
    total / eps.len() as f64
}

fn run_criterion8() {
    let started = std::time::Instant::now();
    let budget = 1200;
    let mut with = Trainer::new(criterion8_config(800, true)).unwrap();
    let mut without = Trainer::new(criterion8_config(800, false)).unwrap();
    for round in 0..(budget / 300) {
        with.run_steps(300).unwrap();
        without.run_steps(300).unwrap();
        let u_with = mean_utilization(&with, 12);
        let u_without = mean_utilization(&without, 12);
        let r_with = with.evaluate(4, 0.0).unwrap();
        let r_without = without.evaluate(4, 0.0).unwrap();
        println!(
            "round {round}: util with {u_with:.3} vs without {u_without:.3} | with fnr {:.2} fpr {:.2}, without fnr {:.2} fpr {:.2} [{:.0}s]",
            r_with.fnr, r_with.fpr, r_without.fnr, r_without.fpr,
            started.elapsed().as_secs_f64()
        );
    }
}

fn run_criterion7() {
    let started = std::time::Instant::now();
    let mut trainer = Trainer::new(criterion7_config(700)).unwrap();
    loop {
        trainer.run_steps(250).unwrap();
        let rates = trainer.evaluate(4, 0.0).unwrap();
        println!(
            "step {} loss {:.4} fnr {:.3} fpr {:.3} [{:.0}s]",
            trainer.step_count(),
            trainer.log().last().map(|r| r.loss).unwrap_or(f64::NAN),
            rates.fnr,
            rates.fpr,
            started.elapsed().as_secs_f64()
        );
        let last_loss = trainer.log().last().map(|r| r.loss).unwrap_or(f64::NAN);
        if last_loss < 0.09 || trainer.step_count() >= 4000 {
            break;
        }
    }
    let mut model = trainer.model().clone();
    model.set_training(false);
    let params = trainer.params().clone();
    let mut validation = Vec::new();
    let mut negs = 0;
    let mut r = nbf_core::rng::chacha(7100, 0);
    while negs < 10_000 {
        let ep = nbf_core::tasks::sample_episode(&mut r, &database_task(), trainer.train_source())
            .unwrap();
        negs += ep.labels.iter().filter(|&&l| !l).count();
        validation.push(ep);
    }
    let tau = calibrate_threshold(&model, &params, &validation, 0.005, false).unwrap();
    println!("tau {tau:.3} [{:.0}s]", started.elapsed().as_secs_f64());
    let calibrated = CalibratedModel::new(model, params, tau, 32).unwrap();
    let mut eval_task = database_task();
    eval_task.query_count = 100;
    let rows = extrapolation_curve(
        &calibrated,
        &eval_task,
        trainer.train_source(),
        &[100, 125],
        0.01,
        30,
        4242,
    )
    .unwrap();
    for row in &rows {
        println!(
            "n {} model_fnr {:.4} model_fpr {:.4} composite_fnr {} total {:.0} [{:.0}s]",
            row.n,
            row.model_fnr,
            row.model_fpr,
            row.composite_fnr,
            row.total_bits,
            started.elapsed().as_secs_f64()
        );
    }
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "7".to_string());
    match which.as_str() {
        "7" => run_criterion7(),
        "8" => run_criterion8(),
        other => panic!("unknown criterion {other}"),
    }
}
