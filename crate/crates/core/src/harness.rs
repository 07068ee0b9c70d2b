//! End-to-end training harness: synthetic bank generation, warmup scoring,
//! the per-batch loop (curriculum sampling, rollouts, difficulty, rewards,
//! advantages, policy update), evaluation, and metrics.
//!
//! Everything is driven by a single seeded stream, so a run is a pure
//! function of (config, bank): repeated runs produce byte-identical
//! metrics.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::TrainConfig;
use crate::curriculum;
use crate::difficulty::{batch_threshold, DifficultyScore, Tier};
use crate::error::{Error, Result};
use crate::grpo;
use crate::image_complexity::{image_complexity_norm, GlcmConfig, HistogramSoftmaxProvider};
use crate::rewards::{self, LengthContext};
use crate::rollout_log::{records_from_groups, RolloutLogRecord};
use crate::toy_policy::{default_task_table, sample_response, TaskTable, ToyPolicy};
use crate::types::{GrayImage, Question, RewardBreakdown, Rollout};

/// Synthetic image edge length; one GLCM patch at the default patch size.
const IMAGE_SIZE: usize = 32;

/// Tier of a generated question, recovered from its `<tier>-<n>` id.
pub fn tier_for_question(id: &str) -> Result<Tier> {
    let prefix = id.split('-').next().unwrap_or("");
    Tier::ALL
        .into_iter()
        .find(|t| t.name() == prefix)
        .ok_or_else(|| {
            Error::InvalidArgument(format!("question id '{id}' lacks a tier prefix"))
        })
}

fn mix_seed(seed: u64, salt: u64, index: u64) -> u64 {
    // splitmix64 over the combined words.
    let mut z = seed
        .wrapping_add(salt.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(index.wrapping_mul(0xBF58476D1CE4E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn tier_texture(tier: Tier, rng: &mut impl Rng) -> GrayImage {
    let n = IMAGE_SIZE;
    match tier {
        // Flat image: zero texture entropy.
        Tier::Easy => GrayImage::constant(n, n, rng.gen_range(0..=255u32) as u8).unwrap(),
        // Coarse two-level stripes: a little texture, two histogram bins.
        Tier::Medium => {
            let width = [4usize, 8][rng.gen_range(0..2)];
            let lo = rng.gen_range(0..=96u32) as u8;
            let hi = lo.saturating_add(128);
            let horizontal = rng.gen::<bool>();
            let mut data = Vec::with_capacity(n * n);
            for r in 0..n {
                for c in 0..n {
                    let band = if horizontal { r } else { c } / width;
                    data.push(if band.is_multiple_of(2) { lo } else { hi });
                }
            }
            GrayImage::new(n, n, data).unwrap()
        }
        // Dense noise: near-maximal texture and histogram entropy.
        Tier::Hard => {
            let data: Vec<u8> = (0..n * n).map(|_| rng.gen()).collect();
            GrayImage::new(n, n, data).unwrap()
        }
    }
}

/// Generates `3 * n_per_tier` questions with tier-matched textures,
/// deterministic in the seed. Ids carry the tier prefix the harness uses
/// to look questions up in the task table.
pub fn generate_question_bank(
    n_per_tier: usize,
    seed: u64,
) -> Result<(Vec<Question>, TaskTable)> {
    if n_per_tier == 0 {
        return Err(Error::InvalidArgument("n_per_tier must be >= 1".into()));
    }
    let tasks = default_task_table();
    let mut questions = Vec::with_capacity(3 * n_per_tier);
    for tier in Tier::ALL {
        let task = tasks.get(tier);
        for i in 0..n_per_tier {
            let mut rng =
                ChaCha8Rng::seed_from_u64(mix_seed(seed, task.image_seed, i as u64));
            let image = tier_texture(tier, &mut rng);
            let answer = rng.gen_range(0..100u32).to_string();
            questions.push(Question::new(format!("{tier}-{i:04}"), image, answer));
        }
    }
    Ok((questions, tasks))
}

/// Fills the cached normalized image complexity of every question that
/// does not have one yet.
pub fn ensure_image_complexity(bank: &mut [Question]) -> Result<()> {
    let cfg = GlcmConfig::default();
    let provider = HistogramSoftmaxProvider::default();
    for q in bank.iter_mut() {
        if q.image_complexity.is_none() {
            q.image_complexity = Some(image_complexity_norm(&q.image, &cfg, &provider)?);
        }
    }
    Ok(())
}

/// One unfiltered scoring pass: G rollouts per question to initialize the
/// extrinsic difficulty the curriculum filters need.
pub fn warmup_pass(
    policy: &ToyPolicy,
    bank: &mut [Question],
    tasks: &TaskTable,
    group_size: usize,
    max_len: usize,
    rng: &mut impl Rng,
) -> Result<()> {
    for q in bank.iter_mut() {
        let task = *tasks.get(tier_for_question(&q.id)?);
        let correct = (0..group_size)
            .filter(|_| {
                sample_response(policy, policy, policy, &task, max_len, rng).correct
            })
            .count();
        q.extrinsic_difficulty = Some(1.0 - correct as f64 / group_size as f64);
    }
    Ok(())
}

/// One metrics row per optimizer step. Tier columns are NaN when the batch
/// contained no rollout of that tier.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: usize,
    pub epoch: usize,
    pub mean_length: f64,
    pub mean_length_tier: [f64; 3],
    pub accuracy: f64,
    pub accuracy_tier: [f64; 3],
    pub mean_reward: f64,
    pub mean_beta: f64,
    pub theta: f64,
    pub clip_fraction: f64,
    pub mean_kl: f64,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str = "step,epoch,mean_length,mean_length_easy,\
mean_length_medium,mean_length_hard,accuracy,accuracy_easy,accuracy_medium,accuracy_hard,\
mean_reward,mean_beta,theta,clip_fraction,mean_kl";

    pub fn to_csv_line(&self) -> String {
        let mut line = String::new();
        write!(line, "{},{}", self.step, self.epoch).unwrap();
        for v in [self.mean_length]
            .into_iter()
            .chain(self.mean_length_tier)
            .chain([self.accuracy])
            .chain(self.accuracy_tier)
            .chain([
                self.mean_reward,
                self.mean_beta,
                self.theta,
                self.clip_fraction,
                self.mean_kl,
            ])
        {
            write!(line, ",{v:.6}").unwrap();
        }
        line
    }
}

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(MetricsRow::CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

/// Everything a training run produces.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub policy: ToyPolicy,
    pub metrics: Vec<MetricsRow>,
    pub rollout_records: Vec<RolloutLogRecord>,
}

struct ScoredGroup {
    question_index: usize,
    tier: Tier,
    rollouts: Vec<Rollout>,
    score: DifficultyScore,
    beta: f64,
}

/// Runs the full training loop over the bank from the default initial
/// policy. The bank is mutated: image complexities are cached and extrinsic
/// difficulties refreshed as questions are rolled out.
pub fn train(config: &TrainConfig, bank: &mut [Question], tasks: &TaskTable) -> Result<TrainRun> {
    train_from(ToyPolicy::default(), config, bank, tasks)
}

/// [`train`] starting from a caller-supplied policy.
pub fn train_from(
    initial: ToyPolicy,
    config: &TrainConfig,
    bank: &mut [Question],
    tasks: &TaskTable,
) -> Result<TrainRun> {
    config.validate()?;
    if bank.is_empty() {
        return Err(Error::InvalidArgument("question bank is empty".into()));
    }
    ensure_image_complexity(bank)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut policy = initial;
    let reference = policy.clone();

    warmup_pass(
        &policy,
        bank,
        tasks,
        config.group_size,
        config.max_len,
        &mut rng,
    )?;

    let steps_per_epoch = if config.steps_per_epoch > 0 {
        config.steps_per_epoch
    } else {
        (bank.len() / config.batch_size).max(1)
    };

    let mut metrics = Vec::with_capacity(config.epochs * steps_per_epoch);
    let mut rollout_records = Vec::new();
    let mut step = 0usize;

    for epoch in 1..=config.epochs {
        for _ in 0..steps_per_epoch {
            step += 1;
            let old = policy.clone();

            let batch = curriculum::sample_batch(
                bank,
                config.sampler,
                epoch,
                config.epochs,
                config.batch_size,
                config.easy_cut,
                config.hard_cut,
                config.p_max,
                &mut rng,
            )?;

            // Rollouts and per-question difficulty for the whole batch.
            let mut scored = Vec::with_capacity(batch.len());
            for &qi in &batch {
                let tier = tier_for_question(&bank[qi].id)?;
                let task = *tasks.get(tier);
                let rollouts: Vec<Rollout> = (0..config.group_size)
                    .map(|_| sample_response(&policy, &old, &reference, &task, config.max_len, &mut rng))
                    .collect();
                let correct = rollouts.iter().filter(|r| r.correct).count();
                let h_image = bank[qi]
                    .image_complexity
                    .expect("complexity cached above");
                let score = DifficultyScore::from_group(
                    correct,
                    config.group_size,
                    h_image,
                    config.difficulty_combine,
                    config.alpha,
                )?;
                bank[qi].extrinsic_difficulty = Some(score.s_extrinsic);
                let beta = grpo::adaptive_beta(score.s_extrinsic, config.beta_min, config.beta_max)?;
                scored.push(ScoredGroup {
                    question_index: qi,
                    tier,
                    rollouts,
                    score,
                    beta,
                });
            }

            // Batch threshold over unique questions, then batch mean length.
            let mut seen = Vec::new();
            let mut unique_scores = Vec::new();
            for s in &scored {
                if !seen.contains(&s.question_index) {
                    seen.push(s.question_index);
                    unique_scores.push(s.score.s_difficulty);
                }
            }
            let theta = batch_threshold(&unique_scores, config.difficulty_percentile)?;
            let total_tokens: usize = scored
                .iter()
                .flat_map(|s| s.rollouts.iter().map(|r| r.length))
                .sum();
            let total_rollouts = scored.len() * config.group_size;
            let batch_mean_len = total_tokens as f64 / total_rollouts as f64;

            // Reward shaping and group assembly.
            let mut groups = Vec::with_capacity(scored.len());
            let mut tiers = Vec::with_capacity(scored.len());
            let mut betas = Vec::with_capacity(scored.len());
            for s in &scored {
                let lens: Vec<f64> = s.rollouts.iter().map(|r| r.length as f64).collect();
                let group_min = lens.iter().cloned().fold(f64::INFINITY, f64::min);
                let group_max = lens.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let correct_lens: Vec<f64> = s
                    .rollouts
                    .iter()
                    .filter(|r| r.correct)
                    .map(|r| r.length as f64)
                    .collect();
                let group_correct = correct_lens.len();
                let mean_correct_len = if group_correct > 0 {
                    correct_lens.iter().sum::<f64>() / group_correct as f64
                } else {
                    0.0
                };

                let mut breakdowns = Vec::with_capacity(s.rollouts.len());
                for r in &s.rollouts {
                    let ctx = LengthContext {
                        len: r.length as f64,
                        batch_mean_len,
                        max_len: config.max_len as f64,
                        group_min_len: group_min,
                        group_max_len: group_max,
                        group_correct,
                        group_size: s.rollouts.len(),
                        mean_correct_len,
                    };
                    let r_a = rewards::accuracy_reward(r);
                    let r_f = rewards::format_reward_flag(r);
                    let r_t = rewards::length_reward(
                        config.reward_scheme,
                        &ctx,
                        s.score.s_difficulty,
                        theta,
                        r.correct,
                    )?;
                    breakdowns.push(RewardBreakdown::new(
                        r_a,
                        r_f,
                        r_t,
                        config.lambda_f,
                        config.lambda_t,
                    ));
                }
                groups.push(grpo::build_group(
                    bank[s.question_index].id.clone(),
                    s.rollouts.clone(),
                    breakdowns,
                )?);
                tiers.push(s.tier);
                betas.push(s.beta);
            }

            let (updated, diag) = grpo::policy_update_step(
                &policy,
                &groups,
                &tiers,
                tasks,
                &betas,
                config.clip_eps,
                config.learning_rate,
                config.max_len,
            )
            .map_err(|e| match e {
                Error::NonFinite(_) => Error::Numerical { step },
                other => other,
            })?;
            if !diag.surrogate_loss.is_finite() {
                return Err(Error::Numerical { step });
            }
            policy = updated;

            metrics.push(batch_metrics(step, epoch, &groups, &tiers, &diag, theta));
            rollout_records.extend(records_from_groups(&groups));
        }
    }

    Ok(TrainRun {
        policy,
        metrics,
        rollout_records,
    })
}

fn batch_metrics(
    step: usize,
    epoch: usize,
    groups: &[crate::types::RolloutGroup],
    tiers: &[Tier],
    diag: &grpo::StepDiagnostics,
    theta: f64,
) -> MetricsRow {
    let mut len_sum = [0.0f64; 4]; // overall + 3 tiers
    let mut correct = [0.0f64; 4];
    let mut count = [0usize; 4];
    let mut reward_sum = 0.0;
    for (group, tier) in groups.iter().zip(tiers) {
        for (r, &reward) in group.rollouts.iter().zip(&group.rewards) {
            for slot in [0, 1 + tier.index()] {
                len_sum[slot] += r.length as f64;
                correct[slot] += r.correct as u8 as f64;
                count[slot] += 1;
            }
            reward_sum += reward;
        }
    }
    let mean = |sum: f64, n: usize| if n > 0 { sum / n as f64 } else { f64::NAN };
    MetricsRow {
        step,
        epoch,
        mean_length: mean(len_sum[0], count[0]),
        mean_length_tier: [
            mean(len_sum[1], count[1]),
            mean(len_sum[2], count[2]),
            mean(len_sum[3], count[3]),
        ],
        accuracy: mean(correct[0], count[0]),
        accuracy_tier: [
            mean(correct[1], count[1]),
            mean(correct[2], count[2]),
            mean(correct[3], count[3]),
        ],
        mean_reward: mean(reward_sum, count[0]),
        mean_beta: diag.mean_beta,
        theta,
        clip_fraction: diag.clip_fraction,
        mean_kl: diag.mean_kl,
    }
}

/// Per-tier evaluation report row; `tier` None is the overall row.
#[derive(Debug, Clone, PartialEq)]
pub struct TierReport {
    pub tier: Option<Tier>,
    pub questions: usize,
    pub accuracy: f64,
    pub mean_length: f64,
}

/// Evaluates a frozen policy: G rollouts per question, deterministic in
/// the seed. Returns the three tier rows followed by the overall row.
pub fn evaluate(
    policy: &ToyPolicy,
    bank: &[Question],
    tasks: &TaskTable,
    group_size: usize,
    max_len: usize,
    seed: u64,
) -> Result<Vec<TierReport>> {
    if bank.is_empty() {
        return Err(Error::InvalidArgument("question bank is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut len_sum = [0.0f64; 4];
    let mut correct = [0.0f64; 4];
    let mut count = [0usize; 4];
    let mut questions = [0usize; 4];
    for q in bank {
        let tier = tier_for_question(&q.id)?;
        let task = *tasks.get(tier);
        questions[0] += 1;
        questions[1 + tier.index()] += 1;
        for _ in 0..group_size {
            let r = sample_response(policy, policy, policy, &task, max_len, &mut rng);
            for slot in [0, 1 + tier.index()] {
                len_sum[slot] += r.length as f64;
                correct[slot] += r.correct as u8 as f64;
                count[slot] += 1;
            }
        }
    }
    let report = |slot: usize, tier: Option<Tier>| TierReport {
        tier,
        questions: questions[slot],
        accuracy: if count[slot] > 0 {
            correct[slot] / count[slot] as f64
        } else {
            f64::NAN
        },
        mean_length: if count[slot] > 0 {
            len_sum[slot] / count[slot] as f64
        } else {
            f64::NAN
        },
    };
    Ok(vec![
        report(1, Some(Tier::Easy)),
        report(2, Some(Tier::Medium)),
        report(3, Some(Tier::Hard)),
        report(0, None),
    ])
}
