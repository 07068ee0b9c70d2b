//! Cross-module integration: config files driving training, outputs
//! round-tripping through their on-disk formats, and error propagation.

use fastgrpo_core::bank::{parse_question_bank, write_question_bank};
use fastgrpo_core::config::{SamplerStrategy, TrainConfig};
use fastgrpo_core::error::Error;
use fastgrpo_core::harness::{evaluate, generate_question_bank, metrics_to_csv, train};
use fastgrpo_core::rollout_log::{append_records, read_rollout_log};
use fastgrpo_core::toy_policy::ToyPolicy;

fn small_config() -> TrainConfig {
    TrainConfig {
        epochs: 2,
        batch_size: 8,
        steps_per_epoch: 3,
        seed: 21,
        ..TrainConfig::default()
    }
}

#[test]
fn config_file_run_matches_in_memory_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let path = dir.path().join("train.ini");
    std::fs::write(&path, cfg.to_ini_string()).unwrap();
    let loaded = TrainConfig::from_ini_file(&path).unwrap();
    assert_eq!(loaded, cfg);

    let run_a = {
        let (mut bank, tasks) = generate_question_bank(8, 5).unwrap();
        train(&cfg, &mut bank, &tasks).unwrap()
    };
    let run_b = {
        let (mut bank, tasks) = generate_question_bank(8, 5).unwrap();
        train(&loaded, &mut bank, &tasks).unwrap()
    };
    assert_eq!(metrics_to_csv(&run_a.metrics), metrics_to_csv(&run_b.metrics));
}

#[test]
fn outputs_roundtrip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config();
    let (mut bank, tasks) = generate_question_bank(8, 9).unwrap();
    let run = train(&cfg, &mut bank, &tasks).unwrap();

    // Policy file: reloaded parameters produce identical evaluations.
    let policy_path = dir.path().join("policy.json");
    run.policy.save(&policy_path).unwrap();
    let reloaded = ToyPolicy::load(&policy_path).unwrap();
    assert_eq!(reloaded, run.policy);
    let a = evaluate(&run.policy, &bank, &tasks, 4, 64, 3).unwrap();
    let b = evaluate(&reloaded, &bank, &tasks, 4, 64, 3).unwrap();
    assert_eq!(a, b);

    // Rollout log: every training record survives the JSONL round-trip.
    let log_path = dir.path().join("rollouts.jsonl");
    let mut file = std::fs::File::create(&log_path).unwrap();
    append_records(&mut file, &run.rollout_records).unwrap();
    drop(file);
    let back = read_rollout_log(&log_path).unwrap();
    assert_eq!(back, run.rollout_records);
    assert_eq!(
        back.len(),
        2 * 3 * cfg.batch_size * cfg.group_size,
        "one record per rollout per step"
    );

    // Bank: training cached scores; both survive the bank round-trip.
    assert!(bank.iter().all(|q| q.extrinsic_difficulty.is_some()));
    assert!(bank.iter().all(|q| q.image_complexity.is_some()));
    let bank_path = dir.path().join("bank.jsonl");
    write_question_bank(&bank_path, &bank, "images").unwrap();
    let parsed = parse_question_bank(&bank_path).unwrap();
    assert_eq!(parsed.len(), bank.len());
    for (p, q) in parsed.iter().zip(&bank) {
        assert_eq!(p.id, q.id);
        assert_eq!(p.image, q.image);
        assert_eq!(p.extrinsic_difficulty, q.extrinsic_difficulty);
        assert_eq!(p.image_complexity, q.image_complexity);
    }
}

#[test]
fn curriculum_exhaustion_aborts_training() {
    let cfg = TrainConfig {
        sampler: SamplerStrategy::Dynamic,
        easy_cut: 0.98,
        hard_cut: 0.99,
        ..small_config()
    };
    let (mut bank, tasks) = generate_question_bank(5, 2).unwrap();
    match train(&cfg, &mut bank, &tasks) {
        Err(Error::CurriculumExhausted { strategy, epoch }) => {
            assert_eq!(strategy, "dynamic");
            assert_eq!(epoch, 1);
        }
        other => panic!("expected curriculum exhaustion, got {other:?}"),
    }
}

#[test]
fn binary_curriculum_trains_through_the_switch() {
    // The kept set changes at the halfway epoch; the run must cross it
    // without exhaustion on a mixed bank.
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 8,
        steps_per_epoch: 2,
        sampler: SamplerStrategy::SlowToFastBinary,
        seed: 3,
        ..TrainConfig::default()
    };
    let (mut bank, tasks) = generate_question_bank(10, 4).unwrap();
    let run = train(&cfg, &mut bank, &tasks).unwrap();
    assert_eq!(run.metrics.len(), 8);
    let epochs: Vec<usize> = run.metrics.iter().map(|m| m.epoch).collect();
    assert_eq!(epochs, vec![1, 1, 2, 2, 3, 3, 4, 4]);
}

#[test]
fn production_scale_preset_validates_but_stays_unused() {
    let cfg = TrainConfig::production_scale();
    cfg.validate().unwrap();
    assert_eq!(cfg.batch_size, 512);
    assert_eq!(cfg.max_len, 4096);
    assert_eq!(cfg.learning_rate, 1e-6);
}
