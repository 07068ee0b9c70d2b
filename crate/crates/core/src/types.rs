//! Shared data model: questions, rollouts, rollout groups, and reward
//! bookkeeping.
//!
//! All types are plain immutable data once constructed; constructors and
//! `validate` methods enforce the structural invariants. Log-probabilities
//! are natural-log everywhere.

use crate::error::{Error, Result};

/// Row-major 8-bit grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl GrayImage {
    /// Builds an image, rejecting empty dimensions and mismatched buffers.
    pub fn new(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("empty image".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "image buffer holds {} bytes, expected {}x{}={}",
                data.len(),
                rows,
                cols,
                rows * cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn constant(rows: usize, cols: usize, value: u8) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.cols + col]
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    /// Transposed copy.
    pub fn transposed(&self) -> GrayImage {
        let mut data = vec![0u8; self.data.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                data[c * self.rows + r] = self.get(r, c);
            }
        }
        GrayImage {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// One training item: an identifier, a grayscale image, the canonical
/// answer, and cached difficulty scores.
///
/// `image_complexity` caches the normalized intrinsic score; it is filled
/// lazily the first time the question is scored. `extrinsic_difficulty`
/// holds the latest online estimate and is refreshed whenever the question
/// is rolled out.
#[derive(Debug, Clone)]
pub struct Question {
    pub id: String,
    pub image: GrayImage,
    pub answer: String,
    pub image_complexity: Option<f64>,
    pub extrinsic_difficulty: Option<f64>,
}

impl Question {
    pub fn new(id: impl Into<String>, image: GrayImage, answer: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            image,
            answer: answer.into(),
            image_complexity: None,
            extrinsic_difficulty: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.extrinsic_difficulty {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::InvalidArgument(format!(
                    "question {}: extrinsic difficulty {s} outside [0,1]",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// One sampled response: token ids, per-token log-probabilities under the
/// current, old, and reference policies, plus the outcome flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub tokens: Vec<u32>,
    pub logp_new: Vec<f64>,
    pub logp_old: Vec<f64>,
    pub logp_ref: Vec<f64>,
    /// Token count; always equals `tokens.len()`.
    pub length: usize,
    pub correct: bool,
    pub format_ok: bool,
}

impl Rollout {
    pub fn validate(&self) -> Result<()> {
        let n = self.tokens.len();
        if self.logp_new.len() != n || self.logp_old.len() != n || self.logp_ref.len() != n {
            return Err(Error::InvalidArgument(format!(
                "log-probability sequences must match token count {n}"
            )));
        }
        if self.length != n {
            return Err(Error::InvalidArgument(format!(
                "length {} does not equal token count {n}",
                self.length
            )));
        }
        for (name, seq) in [
            ("logp_new", &self.logp_new),
            ("logp_old", &self.logp_old),
            ("logp_ref", &self.logp_ref),
        ] {
            if seq.iter().any(|&v| !(v <= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "{name} contains a log-probability above 0"
                )));
            }
        }
        Ok(())
    }
}

/// Per-rollout reward components and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub r_a: f64,
    pub r_f: f64,
    pub r_t: f64,
    pub total: f64,
}

impl RewardBreakdown {
    /// Combines the components; `total` is exactly
    /// `r_a + lambda_f * r_f + lambda_t * r_t`.
    pub fn new(r_a: f64, r_f: f64, r_t: f64, lambda_f: f64, lambda_t: f64) -> Self {
        Self {
            r_a,
            r_f,
            r_t,
            total: r_a + lambda_f * r_f + lambda_t * r_t,
        }
    }
}

/// The G rollouts sampled for one question together with their rewards and
/// normalized advantages.
///
/// Built via [`crate::grpo::build_group`], which computes the advantages
/// and enforces G >= 2 (group standardization is undefined for a single
/// rollout).
#[derive(Debug, Clone)]
pub struct RolloutGroup {
    pub question_id: String,
    pub rollouts: Vec<Rollout>,
    pub breakdowns: Vec<RewardBreakdown>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl RolloutGroup {
    pub fn group_size(&self) -> usize {
        self.rollouts.len()
    }

    /// Fraction of the group's rollouts that are correct.
    pub fn pass_at_k(&self) -> f64 {
        let c = self.rollouts.iter().filter(|r| r.correct).count();
        c as f64 / self.rollouts.len() as f64
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.rollouts.len();
        if g < 2 {
            return Err(Error::InvalidArgument(format!(
                "rollout group needs G >= 2, got {g}"
            )));
        }
        if self.rewards.len() != g || self.advantages.len() != g || self.breakdowns.len() != g {
            return Err(Error::InvalidArgument(
                "rollouts, rewards, and advantages must have equal length".into(),
            ));
        }
        for r in &self.rollouts {
            r.validate()?;
        }
        let mean: f64 = self.advantages.iter().sum::<f64>() / g as f64;
        if mean.abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "advantages not centered: mean {mean}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_image_rejected() {
        let err = GrayImage::new(0, 0, vec![]).unwrap_err();
        assert!(err.to_string().contains("empty image"));
        assert!(GrayImage::new(0, 4, vec![]).is_err());
        assert!(GrayImage::new(4, 0, vec![]).is_err());
    }

    #[test]
    fn image_buffer_must_match_dims() {
        assert!(GrayImage::new(2, 2, vec![0; 3]).is_err());
        assert!(GrayImage::new(2, 2, vec![0; 4]).is_ok());
    }

    #[test]
    fn transpose_roundtrip() {
        let img = GrayImage::new(2, 3, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let t = img.transposed();
        assert_eq!(t.rows(), 3);
        assert_eq!(t.cols(), 2);
        assert_eq!(t.get(2, 1), img.get(1, 2));
        assert_eq!(t.transposed(), img);
    }

    #[test]
    fn rollout_validation_checks_lengths_and_sign() {
        let ok = Rollout {
            tokens: vec![0, 1, 2],
            logp_new: vec![-0.5, -0.5, -0.1],
            logp_old: vec![-0.5, -0.5, -0.1],
            logp_ref: vec![-0.4, -0.6, -0.2],
            length: 3,
            correct: true,
            format_ok: true,
        };
        assert!(ok.validate().is_ok());

        let mut bad = ok.clone();
        bad.length = 2;
        assert!(bad.validate().is_err());

        let mut bad = ok.clone();
        bad.logp_new[0] = 0.1;
        assert!(bad.validate().is_err());

        let mut bad = ok;
        bad.logp_ref.pop();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn breakdown_total_is_exact_combination() {
        let b = RewardBreakdown::new(1.0, 1.0, 0.5, 0.5, 0.5);
        assert_eq!(b.total, 1.0 + 0.5 * 1.0 + 0.5 * 0.5);
        assert_eq!(b.total, 1.75);
    }

    #[test]
    fn question_validates_cached_difficulty_range() {
        let img = GrayImage::constant(2, 2, 7).unwrap();
        let mut q = Question::new("q0", img, "42");
        assert!(q.validate().is_ok());
        q.extrinsic_difficulty = Some(1.5);
        assert!(q.validate().is_err());
    }
}
