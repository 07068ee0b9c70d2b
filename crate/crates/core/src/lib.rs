//! Difficulty-aware group-relative policy optimization, exercised
//! end-to-end on a synthetic question bank with an analytically
//! differentiable toy policy.
//!
//! The crate is organized around the training pipeline:
//!
//! - [`types`], [`config`]: the shared data model and hyperparameters;
//! - [`pgm`], [`bank`], [`rollout_log`]: file formats (P5 images, JSONL
//!   banks and logs, INI configs);
//! - [`image_complexity`]: patch-wise GLCM texture entropy plus a
//!   pluggable semantic-entropy provider;
//! - [`difficulty`]: extrinsic (pass@k) and combined difficulty, tiers,
//!   and the per-batch complexity threshold;
//! - [`rewards`]: accuracy/format rewards and every length-reward scheme;
//! - [`grpo`]: group-relative advantages, the clipped surrogate, the k3 KL
//!   estimator, and the adaptive KL coefficient;
//! - [`curriculum`]: slow-to-fast and related sampling strategies;
//! - [`toy_policy`]: the differentiable policy and synthetic task family;
//! - [`harness`]: bank generation, the training loop, and evaluation.

// Negated comparisons like `!(x > 0.0)` are deliberate: they reject NaN
// along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bank;
pub mod config;
pub mod curriculum;
pub mod difficulty;
pub mod error;
pub mod grpo;
pub mod harness;
pub mod image_complexity;
pub mod pgm;
pub mod rewards;
pub mod rollout_log;
pub mod toy_policy;
pub mod types;

pub use config::{DifficultyCombine, RewardScheme, SamplerStrategy, TrainConfig};
pub use difficulty::{DifficultyScore, Tier};
pub use error::{Error, Result};
pub use types::{GrayImage, Question, RewardBreakdown, Rollout, RolloutGroup};
