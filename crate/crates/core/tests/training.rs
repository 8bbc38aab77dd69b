use mmwave_senn::baselines::train_naive;
use mmwave_senn::dataset::{generate, split};
use mmwave_senn::nn::Section;
use mmwave_senn::optim::{adam_update, lr_schedule, train, train_with_log, AdamConfig, AdamState, OptimError, LOG_HEADER};
use mmwave_senn::{Dataset, EnvConfig, SamplingRanges, SennConfig, TrainConfig};

fn data(n: usize) -> Dataset {
    split(generate(n, 21, &SamplingRanges::default(), &EnvConfig::default()).unwrap(), 0.8, 22).unwrap()
}

fn tiny_model() -> SennConfig {
    SennConfig {
        encoder: vec![32, 32],
        circuit_head: vec![],
        physical_head: vec![32],
    }
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 64,
        ..TrainConfig::desk()
    }
}

#[test]
fn schedule_halves_every_fifty_epochs() {
    assert_eq!(lr_schedule(0), 1e-3);
    assert_eq!(lr_schedule(49), 1e-3);
    assert_eq!(lr_schedule(50), 5e-4);
    assert_eq!(lr_schedule(149), 2.5e-4);
    assert_eq!(lr_schedule(499), 1e-3 / 512.0);
}

#[test]
fn training_reduces_the_loss() {
    let d = data(2_000);
    let out = train(&d, &tiny_model(), &quick(8)).unwrap();
    let first = &out.log[0];
    let last = out.log.last().unwrap();
    assert!(last.train_loss < first.train_loss, "{} -> {}", first.train_loss, last.train_loss);
    assert!(last.test_smse < first.test_smse);
    assert_eq!(out.log.len(), 8);
}

#[test]
fn zero_lambda_never_touches_the_circuit_head() {
    let d = data(1_000);
    let cfg = quick(2);
    let init = mmwave_senn::nn::init_model(&tiny_model(), cfg.init_seed).unwrap();
    let naive = train_naive(&d, &tiny_model(), &cfg).unwrap().model;
    assert_eq!(naive.section(Section::CircuitHead), init.section(Section::CircuitHead));
    assert_ne!(naive.section(Section::PhysicalHead), init.section(Section::PhysicalHead));

    let senn = train(&d, &tiny_model(), &cfg).unwrap().model;
    assert_ne!(senn.section(Section::CircuitHead), init.section(Section::CircuitHead));
    assert_ne!(senn.section(Section::Encoder), naive.section(Section::Encoder));
}

#[test]
fn training_is_repeatable_and_seed_sensitive() {
    let d = data(600);
    let a = train(&d, &tiny_model(), &quick(2)).unwrap();
    let b = train(&d, &tiny_model(), &quick(2)).unwrap();
    assert_eq!(a.model, b.model);
    let mut other = quick(2);
    other.shuffle_seed += 1;
    assert_ne!(train(&d, &tiny_model(), &other).unwrap().model, a.model);
}

#[test]
fn log_is_written_as_csv() {
    let d = data(300);
    let mut buf = Vec::new();
    train_with_log(&d, &tiny_model(), &quick(3), Some(&mut buf)).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], LOG_HEADER);
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("2,"));
}

#[test]
fn unsplit_data_and_bad_configs_are_rejected() {
    let raw = generate(50, 1, &SamplingRanges::default(), &EnvConfig::default()).unwrap();
    assert!(train(&raw, &tiny_model(), &quick(1)).is_err());
    let d = data(50);
    assert!(train(&d, &tiny_model(), &quick(0)).is_err());
    let mut cfg = quick(1);
    cfg.batch_size = 0;
    assert!(train(&d, &tiny_model(), &cfg).is_err());
}

#[test]
fn adam_refuses_non_finite_gradients_without_side_effects() {
    let mut p = vec![1.0, 2.0];
    let mut state = AdamState::new(AdamConfig::default(), [2]);
    let err = adam_update(&mut [&mut p[..]], &[&[0.1, f64::NAN]], &mut state, 1e-3);
    assert!(matches!(err, Err(OptimError::NonFiniteGradient { index: 1, .. })));
    assert_eq!(p, vec![1.0, 2.0]);
    assert_eq!(state.t, 0);
}

#[test]
fn weight_decay_shrinks_parameters_under_zero_gradient() {
    let cfg = AdamConfig {
        tau: 0.1,
        ..AdamConfig::default()
    };
    let mut p = vec![4.0];
    let mut state = AdamState::new(cfg, [1]);
    adam_update(&mut [&mut p[..]], &[&[0.0]], &mut state, 0.5).unwrap();
    assert_eq!(p[0], 4.0 * (1.0 - 0.05));
}

#[test]
fn desk_preset_learns_a_hundred_row_toy_set() {
    let d = data(100);
    let cfg = TrainConfig {
        epochs: 10,
        ..TrainConfig::desk()
    };
    let out = train(&d, &SennConfig::desk(), &cfg).unwrap();
    let losses: Vec<f64> = out.log.iter().map(|e| e.train_loss).collect();
    assert!(losses[9] < losses[0], "{losses:?}");
}
