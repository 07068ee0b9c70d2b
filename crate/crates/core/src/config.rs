//! Training configuration.
//!
//! Defaults are the desk-scale values used by the synthetic harness; the
//! production-scale preset (`TrainConfig::production_scale`) keeps the batch
//! size, learning rate, and generation cap documented for reference.
//!
//! Configs load from an INI-style UTF-8 file: `[section]` headers are
//! organizational, `key = value` lines use the field names below, `#`/`;`
//! start comments. Unknown keys are rejected rather than ignored.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which length-reward shaping to apply as the `r_t` component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardScheme {
    /// Difficulty-aware length reward.
    Fast,
    /// Kimi-style length penalty over the group's length range.
    Kimi,
    /// Cosine interpolation between configured endpoint rewards.
    CosFn,
    /// Budget-relative reward with asymmetric correct/incorrect slopes.
    Dast,
    /// Reward longer correct responses.
    PilotLengthy,
    /// Reward shorter correct responses.
    PilotShort,
    /// No length reward.
    None,
}

impl FromStr for RewardScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fast" => Self::Fast,
            "kimi" => Self::Kimi,
            "cosfn" => Self::CosFn,
            "dast" => Self::Dast,
            "pilot_lengthy" => Self::PilotLengthy,
            "pilot_short" => Self::PilotShort,
            "none" => Self::None,
            other => return Err(Error::Config(format!("unknown reward scheme '{other}'"))),
        })
    }
}

impl fmt::Display for RewardScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fast => "fast",
            Self::Kimi => "kimi",
            Self::CosFn => "cosfn",
            Self::Dast => "dast",
            Self::PilotLengthy => "pilot_lengthy",
            Self::PilotShort => "pilot_short",
            Self::None => "none",
        })
    }
}

/// Curriculum sampling strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerStrategy {
    /// Hard switch at the halfway epoch: drop easy first, then drop hard.
    SlowToFastBinary,
    /// Easy-draw probability rises linearly over epochs.
    SlowToFastContinuous,
    /// Mirror of the binary schedule.
    FastToSlow,
    /// Always keep only the medium band.
    Dynamic,
    /// No filtering.
    None,
}

impl FromStr for SamplerStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "slow_to_fast_binary" => Self::SlowToFastBinary,
            "slow_to_fast_continuous" => Self::SlowToFastContinuous,
            "fast_to_slow" => Self::FastToSlow,
            "dynamic" => Self::Dynamic,
            "none" => Self::None,
            other => return Err(Error::Config(format!("unknown sampler '{other}'"))),
        })
    }
}

impl fmt::Display for SamplerStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SlowToFastBinary => "slow_to_fast_binary",
            Self::SlowToFastContinuous => "slow_to_fast_continuous",
            Self::FastToSlow => "fast_to_slow",
            Self::Dynamic => "dynamic",
            Self::None => "none",
        })
    }
}

/// How extrinsic difficulty and image complexity combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DifficultyCombine {
    Multiplicative,
    WeightedSum,
}

impl FromStr for DifficultyCombine {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "multiplicative" => Self::Multiplicative,
            "weighted_sum" => Self::WeightedSum,
            other => {
                return Err(Error::Config(format!(
                    "unknown difficulty combination '{other}'"
                )))
            }
        })
    }
}

impl fmt::Display for DifficultyCombine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Multiplicative => "multiplicative",
            Self::WeightedSum => "weighted_sum",
        })
    }
}

/// All training hyperparameters plus the synthetic-task knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Rollouts per question (G).
    pub group_size: usize,
    /// Training epochs (N).
    pub epochs: usize,
    /// Questions per batch.
    pub batch_size: usize,
    /// PPO-style clip width.
    pub clip_eps: f64,
    /// KL coefficient at extrinsic difficulty 1.
    pub beta_min: f64,
    /// KL coefficient at extrinsic difficulty 0.
    pub beta_max: f64,
    /// Weight of the format reward.
    pub lambda_f: f64,
    /// Weight of the length reward.
    pub lambda_t: f64,
    /// Batch percentile defining the complexity threshold.
    pub difficulty_percentile: f64,
    /// Extrinsic-difficulty bound below which a question counts as easy.
    pub easy_cut: f64,
    /// Extrinsic-difficulty bound above which a question counts as hard.
    pub hard_cut: f64,
    /// Final easy-draw probability of the continuous sampler.
    pub p_max: f64,
    pub learning_rate: f64,
    pub seed: u64,
    pub reward_scheme: RewardScheme,
    pub sampler: SamplerStrategy,
    pub difficulty_combine: DifficultyCombine,
    /// Extrinsic weight in the weighted-sum combination.
    pub alpha: f64,
    /// Generation cap in tokens.
    pub max_len: usize,
    /// Optimizer steps per epoch; 0 derives one pass from bank/batch size.
    pub steps_per_epoch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            epochs: 10,
            batch_size: 32,
            clip_eps: 0.2,
            beta_min: 0.001,
            beta_max: 0.03,
            lambda_f: 0.5,
            lambda_t: 0.5,
            difficulty_percentile: 0.80,
            easy_cut: 0.25,
            hard_cut: 0.75,
            p_max: 0.4,
            learning_rate: 0.15,
            seed: 0,
            reward_scheme: RewardScheme::Fast,
            sampler: SamplerStrategy::SlowToFastBinary,
            difficulty_combine: DifficultyCombine::Multiplicative,
            alpha: 0.5,
            max_len: 64,
            steps_per_epoch: 0,
        }
    }
}

impl TrainConfig {
    /// Production-scale preset: batch 512, learning rate 1e-6, 4096-token
    /// generation cap. Kept for documentation; far too slow for the
    /// synthetic harness.
    pub fn production_scale() -> Self {
        Self {
            batch_size: 512,
            learning_rate: 1e-6,
            max_len: 4096,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn fail(msg: String) -> Result<()> {
            Err(Error::Config(msg))
        }
        if self.group_size < 2 {
            return fail(format!("group_size must be >= 2, got {}", self.group_size));
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be >= 1".into());
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return fail(format!("clip_eps must be in (0,1), got {}", self.clip_eps));
        }
        if !(self.beta_min > 0.0 && self.beta_min <= self.beta_max) {
            return fail(format!(
                "need 0 < beta_min <= beta_max, got {} and {}",
                self.beta_min, self.beta_max
            ));
        }
        if !(0.0..=1.0).contains(&self.p_max) {
            return fail(format!("p_max must be in [0,1], got {}", self.p_max));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha must be in [0,1], got {}", self.alpha));
        }
        if !(self.easy_cut < self.hard_cut) {
            return fail(format!(
                "easy_cut must be below hard_cut, got {} and {}",
                self.easy_cut, self.hard_cut
            ));
        }
        if !(self.difficulty_percentile > 0.0 && self.difficulty_percentile <= 1.0) {
            return fail(format!(
                "difficulty_percentile must be in (0,1], got {}",
                self.difficulty_percentile
            ));
        }
        if !self.learning_rate.is_finite() {
            return fail("learning_rate must be finite".into());
        }
        if self.max_len < 2 {
            return fail(format!(
                "max_len must be >= 2 (stop and answer tokens), got {}",
                self.max_len
            ));
        }
        Ok(())
    }

    pub fn from_ini_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_ini_str(&text)
    }

    /// Parses key/value pairs on top of the defaults and validates.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        msg: format!("unterminated section header '{line}'"),
                    });
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                msg: format!("expected 'key = value', got '{line}'"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies a single `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            value
                .parse::<T>()
                .map_err(|e| Error::Config(format!("bad value '{value}' for {key}: {e}")))
        }
        match key {
            "group_size" => self.group_size = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "clip_eps" => self.clip_eps = num(key, value)?,
            "beta_min" => self.beta_min = num(key, value)?,
            "beta_max" => self.beta_max = num(key, value)?,
            "lambda_f" => self.lambda_f = num(key, value)?,
            "lambda_t" => self.lambda_t = num(key, value)?,
            "difficulty_percentile" => self.difficulty_percentile = num(key, value)?,
            "easy_cut" => self.easy_cut = num(key, value)?,
            "hard_cut" => self.hard_cut = num(key, value)?,
            "p_max" => self.p_max = num(key, value)?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "reward_scheme" => self.reward_scheme = value.parse()?,
            "sampler" => self.sampler = value.parse()?,
            "difficulty_combine" => self.difficulty_combine = value.parse()?,
            "alpha" => self.alpha = num(key, value)?,
            "max_len" => self.max_len = num(key, value)?,
            "steps_per_epoch" => self.steps_per_epoch = num(key, value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Canonical INI rendering of this config.
    pub fn to_ini_string(&self) -> String {
        format!(
            "[train]\n\
             group_size = {}\n\
             epochs = {}\n\
             batch_size = {}\n\
             clip_eps = {}\n\
             learning_rate = {}\n\
             seed = {}\n\
             max_len = {}\n\
             steps_per_epoch = {}\n\
             \n[rewards]\n\
             reward_scheme = {}\n\
             lambda_f = {}\n\
             lambda_t = {}\n\
             \n[kl]\n\
             beta_min = {}\n\
             beta_max = {}\n\
             \n[difficulty]\n\
             difficulty_percentile = {}\n\
             difficulty_combine = {}\n\
             alpha = {}\n\
             \n[curriculum]\n\
             sampler = {}\n\
             easy_cut = {}\n\
             hard_cut = {}\n\
             p_max = {}\n",
            self.group_size,
            self.epochs,
            self.batch_size,
            self.clip_eps,
            self.learning_rate,
            self.seed,
            self.max_len,
            self.steps_per_epoch,
            self.reward_scheme,
            self.lambda_f,
            self.lambda_t,
            self.beta_min,
            self.beta_max,
            self.difficulty_percentile,
            self.difficulty_combine,
            self.alpha,
            self.sampler,
            self.easy_cut,
            self.hard_cut,
            self.p_max,
        )
    }
}
