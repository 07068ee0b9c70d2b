//! Question difficulty: extrinsic (online pass@k), combined score, tier
//! assignment, and the per-batch complexity threshold.

use crate::config::DifficultyCombine;
use crate::error::{Error, Result};

/// Difficulty tier, assigned from pass@k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tier {
    Easy,
    Medium,
    Hard,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Easy, Tier::Medium, Tier::Hard];

    pub fn index(self) -> usize {
        match self {
            Tier::Easy => 0,
            Tier::Medium => 1,
            Tier::Hard => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tier::Easy => "easy",
            Tier::Medium => "medium",
            Tier::Hard => "hard",
        }
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Snapshot of every difficulty quantity for one question in one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifficultyScore {
    pub s_extrinsic: f64,
    pub h_image: f64,
    pub s_difficulty: f64,
    pub tier: Tier,
}

impl DifficultyScore {
    /// Derives all quantities from a group's correct count `c` out of `k`
    /// rollouts and the cached normalized image complexity.
    pub fn from_group(
        correct: usize,
        k: usize,
        h_image: f64,
        mode: DifficultyCombine,
        alpha: f64,
    ) -> Result<Self> {
        let s_extrinsic = extrinsic_difficulty(correct, k)?;
        let s_difficulty = combined_difficulty(s_extrinsic, h_image, mode, alpha)?;
        let tier = difficulty_tier(1.0 - s_extrinsic);
        Ok(Self {
            s_extrinsic,
            h_image,
            s_difficulty,
            tier,
        })
    }
}

/// `1 - c/k`: the fraction of the question's rollouts the policy got wrong.
pub fn extrinsic_difficulty(correct: usize, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("pass@k needs k >= 1".into()));
    }
    if correct > k {
        return Err(Error::InvalidArgument(format!(
            "correct count {correct} exceeds rollout count {k}"
        )));
    }
    Ok(1.0 - correct as f64 / k as f64)
}

/// Combines extrinsic difficulty and normalized image complexity.
pub fn combined_difficulty(
    s_ext: f64,
    h_img: f64,
    mode: DifficultyCombine,
    alpha: f64,
) -> Result<f64> {
    for (name, v) in [("s_ext", s_ext), ("h_img", h_img)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "{name} = {v} outside [0,1]"
            )));
        }
    }
    Ok(match mode {
        DifficultyCombine::Multiplicative => s_ext * h_img,
        DifficultyCombine::WeightedSum => alpha * s_ext + (1.0 - alpha) * h_img,
    })
}

/// Easy iff pass@k >= 0.75, Hard iff pass@k <= 0.25, Medium otherwise.
/// Both boundaries are inclusive on the named side.
pub fn difficulty_tier(pass_at_k: f64) -> Tier {
    if pass_at_k >= 0.75 {
        Tier::Easy
    } else if pass_at_k <= 0.25 {
        Tier::Hard
    } else {
        Tier::Medium
    }
}

/// Nearest-rank percentile: sort ascending and take the element at index
/// `ceil(percentile * B) - 1`. The result is always a realized score, so
/// the "complex" side is nonempty whenever `percentile < 1`.
pub fn batch_threshold(scores: &[f64], percentile: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument(
            "batch threshold over empty score list".into(),
        ));
    }
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "percentile {percentile} outside (0,1]"
        )));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("difficulty scores must not be NaN"));
    // The 1e-9 slack keeps an exact product like 0.8*10 from ceiling to 9.
    let rank = (percentile * sorted.len() as f64 - 1e-9).ceil() as usize;
    let idx = rank.clamp(1, sorted.len()) - 1;
    Ok(sorted[idx])
}
