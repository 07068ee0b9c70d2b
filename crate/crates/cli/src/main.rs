//! `fastgrpo`: train and inspect the difficulty-aware GRPO harness.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical abort,
//! 4 curriculum exhausted, 1 anything else.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fastgrpo_core::bank::{parse_question_bank, write_question_bank};
use fastgrpo_core::config::{RewardScheme, SamplerStrategy, TrainConfig};
use fastgrpo_core::curriculum::kept_indices;
use fastgrpo_core::error::Error;
use fastgrpo_core::harness::{
    evaluate, generate_question_bank, metrics_to_csv, train, warmup_pass,
};
use fastgrpo_core::image_complexity::{
    image_complexity_norm, image_complexity_raw, GlcmConfig, HistogramSoftmaxProvider,
};
use fastgrpo_core::pgm::read_pgm;
use fastgrpo_core::rewards::{length_reward, LengthContext};
use fastgrpo_core::rollout_log::append_records;
use fastgrpo_core::toy_policy::{default_task_table, ToyPolicy};
use fastgrpo_core::Tier;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "fastgrpo", version, about = "Difficulty-aware GRPO training harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the training loop and write metrics, rollouts, and the policy.
    Train(TrainArgs),
    /// Evaluate a saved policy on a question bank.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic question bank.
    GenBank(GenBankArgs),
    /// Score one PGM image: raw and normalized complexity.
    ScoreImage(ScoreImageArgs),
    /// Compute a single length reward.
    ShapeReward(ShapeRewardArgs),
    /// Sweep response length and emit one CSV column per reward scheme.
    CompareRewards(CompareRewardsArgs),
    /// Show which questions a curriculum strategy keeps at an epoch.
    SampleCurriculum(SampleCurriculumArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// INI config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Existing bank to train on; a fresh synthetic bank is generated
    /// otherwise.
    #[arg(long)]
    bank: Option<PathBuf>,
    /// Additional `key=value` config overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Saved policy (JSON parameter map).
    #[arg(long)]
    policy: PathBuf,
    /// Question bank to evaluate on.
    #[arg(long)]
    bank: PathBuf,
    /// Rollouts per question.
    #[arg(long, default_value_t = 8)]
    group_size: usize,
    /// Generation cap in tokens.
    #[arg(long, default_value_t = 64)]
    max_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct GenBankArgs {
    /// Questions per difficulty tier.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output directory for bank.jsonl and its images.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreImageArgs {
    /// PGM (P5) image path.
    image: PathBuf,
    /// Quantization levels.
    #[arg(long, default_value_t = 64)]
    levels: usize,
    /// Patch size in pixels.
    #[arg(long, default_value_t = 64)]
    patch: usize,
}

#[derive(Args, Clone)]
struct RewardContextArgs {
    /// Response length in tokens.
    #[arg(long = "L")]
    len: f64,
    /// Batch mean length.
    #[arg(long = "Lavg")]
    len_avg: f64,
    /// Generation cap.
    #[arg(long, default_value_t = 64.0)]
    max_len: f64,
    /// Group minimum length.
    #[arg(long, default_value_t = 0.0)]
    min_len: f64,
    /// Group maximum length; defaults to the generation cap.
    #[arg(long)]
    group_max_len: Option<f64>,
    /// Correct rollouts in the group.
    #[arg(long, default_value_t = 4)]
    group_correct: usize,
    /// Group size.
    #[arg(long, default_value_t = 8)]
    group_size: usize,
    /// Mean length of the group's correct rollouts.
    #[arg(long)]
    mean_correct_len: Option<f64>,
    /// Combined difficulty score of the question.
    #[arg(long, default_value_t = 0.5)]
    sd: f64,
    /// Batch complexity threshold.
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    /// Treat the rollout as incorrect.
    #[arg(long)]
    incorrect: bool,
}

impl RewardContextArgs {
    fn context(&self, len: f64) -> LengthContext {
        LengthContext {
            len,
            batch_mean_len: self.len_avg,
            max_len: self.max_len,
            group_min_len: self.min_len,
            group_max_len: self.group_max_len.unwrap_or(self.max_len),
            group_correct: self.group_correct,
            group_size: self.group_size,
            mean_correct_len: self.mean_correct_len.unwrap_or(self.len_avg),
        }
    }
}

#[derive(Args)]
struct ShapeRewardArgs {
    /// Reward scheme name.
    #[arg(long)]
    scheme: RewardScheme,
    #[command(flatten)]
    ctx: RewardContextArgs,
}

#[derive(Args)]
struct CompareRewardsArgs {
    #[arg(long, default_value_t = 0.0)]
    from: f64,
    #[arg(long, default_value_t = 64.0)]
    to: f64,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    #[command(flatten)]
    ctx: SweepContextArgs,
}

/// Like [`RewardContextArgs`] without the single length.
#[derive(Args, Clone)]
struct SweepContextArgs {
    #[arg(long = "Lavg", default_value_t = 20.0)]
    len_avg: f64,
    #[arg(long, default_value_t = 64.0)]
    max_len: f64,
    #[arg(long, default_value_t = 0.0)]
    min_len: f64,
    #[arg(long)]
    group_max_len: Option<f64>,
    #[arg(long, default_value_t = 4)]
    group_correct: usize,
    #[arg(long, default_value_t = 8)]
    group_size: usize,
    #[arg(long)]
    mean_correct_len: Option<f64>,
    #[arg(long, default_value_t = 0.3)]
    sd: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long)]
    incorrect: bool,
}

#[derive(Args)]
struct SampleCurriculumArgs {
    /// Sampling strategy name.
    #[arg(long)]
    strategy: SamplerStrategy,
    /// Current epoch (1-based).
    #[arg(long)]
    epoch: usize,
    /// Total epochs.
    #[arg(long = "of")]
    total: usize,
    /// Question bank; needs tier-prefixed ids unless difficulty scores are
    /// already cached in the file.
    #[arg(long)]
    bank: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Rollouts per question for the warmup scoring pass.
    #[arg(long, default_value_t = 8)]
    group_size: usize,
    #[arg(long, default_value_t = 0.25)]
    easy_cut: f64,
    #[arg(long, default_value_t = 0.75)]
    hard_cut: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_) | Error::Parse { .. } | Error::InvalidArgument(_) => 2,
                Error::Numerical { .. } | Error::NonFinite(_) => 3,
                Error::CurriculumExhausted { .. } => 4,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> fastgrpo_core::Result<()> {
    match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::GenBank(args) => cmd_gen_bank(args),
        Command::ScoreImage(args) => cmd_score_image(args),
        Command::ShapeReward(args) => cmd_shape_reward(args),
        Command::CompareRewards(args) => cmd_compare_rewards(args),
        Command::SampleCurriculum(args) => cmd_sample_curriculum(args),
    }
}

fn create_dir(path: &Path) -> fastgrpo_core::Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: &str) -> fastgrpo_core::Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn cmd_train(args: TrainArgs) -> fastgrpo_core::Result<()> {
    let mut config = TrainConfig::from_ini_file(&args.config)?;
    for pair in &args.overrides {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            Error::Config(format!("override '{pair}' is not of the form key=value"))
        })?;
        config.set(key.trim(), value.trim())?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;

    create_dir(&args.out)?;
    let tasks = default_task_table();
    let mut bank = match &args.bank {
        Some(path) => parse_question_bank(path)?,
        None => generate_question_bank(100, config.seed)?.0,
    };

    let run = train(&config, &mut bank, &tasks)?;

    write_file(&args.out.join("metrics.csv"), &metrics_to_csv(&run.metrics))?;
    let rollout_path = args.out.join("rollouts.jsonl");
    let mut rollout_file =
        fs::File::create(&rollout_path).map_err(|e| Error::io(&rollout_path, e))?;
    append_records(&mut rollout_file, &run.rollout_records)
        .map_err(|e| Error::io(&rollout_path, e))?;
    run.policy.save(&args.out.join("policy.json"))?;
    write_question_bank(&args.out.join("bank.jsonl"), &bank, "images")?;

    let last = run.metrics.last().expect("at least one step");
    println!(
        "trained {} steps over {} epochs; final mean length {:.3}, accuracy {:.3}",
        last.step, last.epoch, last.mean_length, last.accuracy
    );
    println!("outputs in {}", args.out.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> fastgrpo_core::Result<()> {
    let policy = ToyPolicy::load(&args.policy)?;
    let bank = parse_question_bank(&args.bank)?;
    let tasks = default_task_table();
    let report = evaluate(
        &policy,
        &bank,
        &tasks,
        args.group_size,
        args.max_len,
        args.seed,
    )?;
    println!("tier,questions,accuracy,mean_length");
    for row in report {
        let tier = row.tier.map_or("overall", Tier::name);
        println!(
            "{tier},{},{:.6},{:.6}",
            row.questions, row.accuracy, row.mean_length
        );
    }
    Ok(())
}

fn cmd_gen_bank(args: GenBankArgs) -> fastgrpo_core::Result<()> {
    let (bank, _) = generate_question_bank(args.n, args.seed)?;
    create_dir(&args.out)?;
    write_question_bank(&args.out.join("bank.jsonl"), &bank, "images")?;
    println!(
        "wrote {} questions ({} per tier) to {}",
        bank.len(),
        args.n,
        args.out.join("bank.jsonl").display()
    );
    Ok(())
}

fn cmd_score_image(args: ScoreImageArgs) -> fastgrpo_core::Result<()> {
    let image = read_pgm(&args.image)?;
    let cfg = GlcmConfig {
        gray_levels: args.levels,
        patch_size: args.patch,
        ..GlcmConfig::default()
    };
    let provider = HistogramSoftmaxProvider::default();
    let raw = image_complexity_raw(&image, &cfg, &provider)?;
    let norm = image_complexity_norm(&image, &cfg, &provider)?;
    println!("{raw:.6} {norm:.6}");
    Ok(())
}

fn cmd_shape_reward(args: ShapeRewardArgs) -> fastgrpo_core::Result<()> {
    let ctx = args.ctx.context(args.ctx.len);
    let value = length_reward(
        args.scheme,
        &ctx,
        args.ctx.sd,
        args.ctx.theta,
        !args.ctx.incorrect,
    )?;
    println!("{value:.6}");
    Ok(())
}

fn cmd_compare_rewards(args: CompareRewardsArgs) -> fastgrpo_core::Result<()> {
    if args.step <= 0.0 || args.step.is_nan() || args.to < args.from {
        return Err(Error::InvalidArgument(
            "need step > 0 and to >= from".into(),
        ));
    }
    let schemes = [
        RewardScheme::Fast,
        RewardScheme::Kimi,
        RewardScheme::CosFn,
        RewardScheme::Dast,
        RewardScheme::PilotLengthy,
        RewardScheme::PilotShort,
    ];
    println!("L,fast,kimi,cosfn,dast,pilot_lengthy,pilot_short");
    let c = &args.ctx;
    let mut len = args.from;
    while len <= args.to + 1e-9 {
        let ctx = LengthContext {
            len,
            batch_mean_len: c.len_avg,
            max_len: c.max_len,
            group_min_len: c.min_len,
            group_max_len: c.group_max_len.unwrap_or(c.max_len),
            group_correct: c.group_correct,
            group_size: c.group_size,
            mean_correct_len: c.mean_correct_len.unwrap_or(c.len_avg),
        };
        let mut fields = vec![format!("{len}")];
        for scheme in schemes {
            let v = length_reward(scheme, &ctx, c.sd, c.theta, !c.incorrect)?;
            fields.push(format!("{v:.6}"));
        }
        println!("{}", fields.join(","));
        len += args.step;
    }
    Ok(())
}

fn cmd_sample_curriculum(args: SampleCurriculumArgs) -> fastgrpo_core::Result<()> {
    if args.epoch == 0 || args.epoch > args.total {
        return Err(Error::InvalidArgument(format!(
            "epoch {} outside 1..={}",
            args.epoch, args.total
        )));
    }
    let mut bank = parse_question_bank(&args.bank)?;
    if bank.iter().any(|q| q.extrinsic_difficulty.is_none()) {
        // Score with the untrained policy, exactly like epoch 1 of training.
        let tasks = default_task_table();
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        warmup_pass(
            &ToyPolicy::default(),
            &mut bank,
            &tasks,
            args.group_size,
            64,
            &mut rng,
        )?;
    }
    let kept = kept_indices(
        &bank,
        args.strategy,
        args.epoch,
        args.total,
        args.easy_cut,
        args.hard_cut,
    )?;
    for &i in &kept {
        println!("{}", bank[i].id);
    }
    eprintln!(
        "kept {} of {} questions (strategy {}, epoch {} of {})",
        kept.len(),
        bank.len(),
        args.strategy,
        args.epoch,
        args.total
    );
    Ok(())
}
