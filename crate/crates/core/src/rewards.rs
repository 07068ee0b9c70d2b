//! Reward components: accuracy, format, the difficulty-aware length reward,
//! the baseline length rewards (Kimi penalty, cosine interpolation, DAST),
//! the two pilot length rewards, and their weighted combination.
//!
//! All functions are pure; the harness evaluates them data-parallel across
//! rollouts.

use crate::config::RewardScheme;
use crate::error::{Error, Result};
use crate::types::Rollout;

/// Length-related quantities a reward scheme may need, gathered once per
/// rollout from its batch and group.
#[derive(Debug, Clone, Copy)]
pub struct LengthContext {
    /// This rollout's token count.
    pub len: f64,
    /// Mean token count over every rollout in the batch.
    pub batch_mean_len: f64,
    /// Generation cap.
    pub max_len: f64,
    /// Shortest rollout in the group.
    pub group_min_len: f64,
    /// Longest rollout in the group.
    pub group_max_len: f64,
    /// Correct rollouts in the group (c).
    pub group_correct: usize,
    /// Group size (N).
    pub group_size: usize,
    /// Mean token count of the group's correct rollouts; 0 when none exist.
    pub mean_correct_len: f64,
}

impl LengthContext {
    /// Context for a lone rollout, mainly for the CLI and tests.
    pub fn solo(len: f64, batch_mean_len: f64, max_len: f64) -> Self {
        Self {
            len,
            batch_mean_len,
            max_len,
            group_min_len: len,
            group_max_len: len,
            group_correct: 0,
            group_size: 1,
            mean_correct_len: 0.0,
        }
    }
}

/// 1 for a correct rollout, 0 otherwise.
pub fn accuracy_reward(rollout: &Rollout) -> f64 {
    if rollout.correct {
        1.0
    } else {
        0.0
    }
}

/// 1 iff the text contains exactly one well-formed `<think>...</think>`
/// pair followed by exactly one `<answer>...</answer>` pair, in that order.
pub fn format_reward(text: &str) -> f64 {
    fn positions(text: &str, tag: &str) -> Vec<usize> {
        text.match_indices(tag).map(|(i, _)| i).collect()
    }
    let think_open = positions(text, "<think>");
    let think_close = positions(text, "</think>");
    let answer_open = positions(text, "<answer>");
    let answer_close = positions(text, "</answer>");
    let singles = [&think_open, &think_close, &answer_open, &answer_close];
    if singles.iter().any(|v| v.len() != 1) {
        return 0.0;
    }
    let ordered = think_open[0] < think_close[0]
        && think_close[0] < answer_open[0]
        && answer_open[0] < answer_close[0];
    if ordered {
        1.0
    } else {
        0.0
    }
}

/// Format reward for the synthetic harness, which carries validity as a
/// flag instead of response text.
pub fn format_reward_flag(rollout: &Rollout) -> f64 {
    if rollout.format_ok {
        1.0
    } else {
        0.0
    }
}

/// Difficulty-aware length reward.
///
/// Not-complex and correct: `1 - L/L_avg`, clamped below at -1 so a runaway
/// length cannot dominate the accuracy reward. Complex and incorrect:
/// `min(L/L_avg - 1, 1)`. Everything else: 0. A question counts as complex
/// when its difficulty score reaches the batch threshold (`s_d >= theta`).
pub fn fast_length_reward(ctx: &LengthContext, s_d: f64, theta: f64, r_a: f64) -> Result<f64> {
    if !(ctx.batch_mean_len > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "batch mean length must be positive, got {}",
            ctx.batch_mean_len
        )));
    }
    let ratio = ctx.len / ctx.batch_mean_len;
    Ok(if s_d < theta && r_a == 1.0 {
        (1.0 - ratio).max(-1.0)
    } else if s_d >= theta && r_a == 0.0 {
        (ratio - 1.0).min(1.0)
    } else {
        0.0
    })
}

/// Kimi-style penalty over the group's length range. The degenerate group
/// (all lengths equal) returns the neutral 0.
pub fn kimi_length_penalty(ctx: &LengthContext, correct: bool) -> f64 {
    let span = ctx.group_max_len - ctx.group_min_len;
    if span == 0.0 {
        return 0.0;
    }
    let base = 0.5 - (ctx.len - ctx.group_min_len) / span;
    if correct {
        base
    } else {
        base.min(0.0)
    }
}

/// Endpoint rewards for the cosine scheme: the value at length 0 and at the
/// generation cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CosineEndpoints {
    pub at_zero: f64,
    pub at_max: f64,
}

impl CosineEndpoints {
    /// Correct answers: 1.0 at length 0 decaying to 0.5 at the cap.
    pub const CORRECT_DEFAULT: CosineEndpoints = CosineEndpoints {
        at_zero: 1.0,
        at_max: 0.5,
    };
    /// Wrong answers: -1.0 at length 0 rising to 0.0 at the cap.
    pub const WRONG_DEFAULT: CosineEndpoints = CosineEndpoints {
        at_zero: -1.0,
        at_max: 0.0,
    };
}

/// Cosine interpolation between the outcome's endpoint rewards:
/// `eta_min + (eta_max - eta_min)/2 * (1 + cos(t*pi/T))` with
/// `eta_max = at_zero`, `eta_min = at_max`, `t = L`, `T = max_len`.
pub fn cosine_length_reward(
    ctx: &LengthContext,
    correct: bool,
    correct_endpoints: CosineEndpoints,
    wrong_endpoints: CosineEndpoints,
) -> Result<f64> {
    if ctx.len > ctx.max_len {
        return Err(Error::InvalidArgument(format!(
            "length {} exceeds generation cap {}",
            ctx.len, ctx.max_len
        )));
    }
    let e = if correct {
        correct_endpoints
    } else {
        wrong_endpoints
    };
    let (eta_max, eta_min) = (e.at_zero, e.at_max);
    let t_over_cap = ctx.len / ctx.max_len;
    Ok(eta_min + 0.5 * (eta_max - eta_min) * (1.0 + (t_over_cap * std::f64::consts::PI).cos()))
}

/// Budget-relative length reward. The budget interpolates between the mean
/// correct length and the cap by the group's success rate; with no correct
/// rollout the budget is the cap itself.
pub fn dast_length_reward(ctx: &LengthContext, correct: bool) -> Result<f64> {
    let p = ctx.group_correct as f64 / ctx.group_size as f64;
    let budget = p * ctx.mean_correct_len + (1.0 - p) * ctx.max_len;
    if !(budget > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "length budget must be positive, got {budget}"
        )));
    }
    let lambda = (ctx.len - budget) / budget;
    Ok(if correct {
        (-0.5 * lambda + 0.5).max(0.1)
    } else {
        (0.9 * lambda - 0.1).min(-0.1)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PilotMode {
    Lengthy,
    Short,
}

/// Pilot rewards defined on correct responses only: `L/L_max` (lengthy) or
/// `1 - L/L_max` (short); incorrect rollouts get 0.
pub fn pilot_length_reward(ctx: &LengthContext, correct: bool, mode: PilotMode) -> f64 {
    if !correct {
        return 0.0;
    }
    let ratio = ctx.len / ctx.max_len;
    match mode {
        PilotMode::Lengthy => ratio,
        PilotMode::Short => 1.0 - ratio,
    }
}

/// `r_a + lambda_f * r_f + lambda_t * r_t`.
pub fn total_reward(r_a: f64, r_f: f64, r_t: f64, lambda_f: f64, lambda_t: f64) -> f64 {
    r_a + lambda_f * r_f + lambda_t * r_t
}

/// Dispatches the configured scheme to produce the `r_t` component.
pub fn length_reward(
    scheme: RewardScheme,
    ctx: &LengthContext,
    s_d: f64,
    theta: f64,
    correct: bool,
) -> Result<f64> {
    let r_a = if correct { 1.0 } else { 0.0 };
    match scheme {
        RewardScheme::Fast => fast_length_reward(ctx, s_d, theta, r_a),
        RewardScheme::Kimi => Ok(kimi_length_penalty(ctx, correct)),
        RewardScheme::CosFn => cosine_length_reward(
            ctx,
            correct,
            CosineEndpoints::CORRECT_DEFAULT,
            CosineEndpoints::WRONG_DEFAULT,
        ),
        RewardScheme::Dast => dast_length_reward(ctx, correct),
        RewardScheme::PilotLengthy => Ok(pilot_length_reward(ctx, correct, PilotMode::Lengthy)),
        RewardScheme::PilotShort => Ok(pilot_length_reward(ctx, correct, PilotMode::Short)),
        RewardScheme::None => Ok(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(len: f64, avg: f64) -> LengthContext {
        LengthContext::solo(len, avg, 64.0)
    }

    #[test]
    fn accuracy_reads_flag_only() {
        let mut r = Rollout {
            tokens: vec![0],
            logp_new: vec![-1.0],
            logp_old: vec![-1.0],
            logp_ref: vec![-1.0],
            length: 1,
            correct: true,
            format_ok: true,
        };
        assert_eq!(accuracy_reward(&r), 1.0);
        r.correct = false;
        assert_eq!(accuracy_reward(&r), 0.0);
    }

    #[test]
    fn format_reward_cases() {
        assert_eq!(format_reward("<think>x</think><answer>y</answer>"), 1.0);
        assert_eq!(format_reward("<answer>y</answer><think>x</think>"), 0.0);
        assert_eq!(format_reward("<think>x</think>"), 0.0);
        assert_eq!(format_reward(""), 0.0);
        assert_eq!(
            format_reward("<think>a</think><think>b</think><answer>y</answer>"),
            0.0
        );
        assert_eq!(
            format_reward("pre <think>x</think> mid <answer>y</answer> post"),
            1.0
        );
        assert_eq!(format_reward("<think><answer>y</answer></think>"), 0.0);
    }

    #[test]
    fn fast_reward_branches() {
        // Not complex + correct: shorter than average is rewarded.
        let r = fast_length_reward(&ctx(100.0, 200.0), 0.2, 0.5, 1.0).unwrap();
        assert_eq!(r, 0.5);
        // Complex + incorrect: longer than average is rewarded, capped at 1.
        let r = fast_length_reward(&ctx(800.0, 200.0), 0.7, 0.5, 0.0).unwrap();
        assert_eq!(r, 1.0);
        // Mismatched cases get nothing.
        assert_eq!(
            fast_length_reward(&ctx(100.0, 200.0), 0.2, 0.5, 0.0).unwrap(),
            0.0
        );
        assert_eq!(
            fast_length_reward(&ctx(100.0, 200.0), 0.7, 0.5, 1.0).unwrap(),
            0.0
        );
        // Threshold is inclusive on the complex side.
        assert_eq!(
            fast_length_reward(&ctx(300.0, 200.0), 0.5, 0.5, 0.0).unwrap(),
            0.5
        );
        // The easy-correct branch is clamped below at -1.
        assert_eq!(
            fast_length_reward(&ctx(1000.0, 100.0), 0.2, 0.5, 1.0).unwrap(),
            -1.0
        );
        assert!(fast_length_reward(&ctx(1.0, 0.0), 0.2, 0.5, 1.0).is_err());
    }

    #[test]
    fn fast_reward_monotonicity() {
        let mut prev = f64::INFINITY;
        for len in 0..40 {
            let r = fast_length_reward(&ctx(len as f64, 10.0), 0.0, 0.5, 1.0).unwrap();
            assert!(r <= prev);
            prev = r;
        }
        let mut prev = f64::NEG_INFINITY;
        for len in 0..40 {
            let r = fast_length_reward(&ctx(len as f64, 10.0), 0.9, 0.5, 0.0).unwrap();
            assert!(r >= prev && r <= 1.0);
            prev = r;
        }
    }

    fn group_ctx(len: f64, min: f64, max: f64) -> LengthContext {
        LengthContext {
            len,
            batch_mean_len: (min + max) / 2.0,
            max_len: 64.0,
            group_min_len: min,
            group_max_len: max,
            group_correct: 4,
            group_size: 8,
            mean_correct_len: 20.0,
        }
    }

    #[test]
    fn kimi_endpoints_and_incorrect_cap() {
        assert_eq!(kimi_length_penalty(&group_ctx(10.0, 10.0, 30.0), true), 0.5);
        assert_eq!(
            kimi_length_penalty(&group_ctx(30.0, 10.0, 30.0), true),
            -0.5
        );
        assert_eq!(
            kimi_length_penalty(&group_ctx(10.0, 10.0, 30.0), false),
            0.0
        );
        // Degenerate group.
        assert_eq!(kimi_length_penalty(&group_ctx(10.0, 10.0, 10.0), true), 0.0);
        // Incorrect rollouts are never rewarded.
        for len in 10..=30 {
            assert!(kimi_length_penalty(&group_ctx(len as f64, 10.0, 30.0), false) <= 0.0);
        }
    }

    #[test]
    fn cosine_endpoints_and_midpoint() {
        let c = CosineEndpoints::CORRECT_DEFAULT;
        let w = CosineEndpoints::WRONG_DEFAULT;
        assert!((cosine_length_reward(&ctx(0.0, 1.0), true, c, w).unwrap() - 1.0).abs() < 1e-12);
        assert!((cosine_length_reward(&ctx(64.0, 1.0), true, c, w).unwrap() - 0.5).abs() < 1e-12);
        assert!((cosine_length_reward(&ctx(32.0, 1.0), true, c, w).unwrap() - 0.75).abs() < 1e-12);
        assert!((cosine_length_reward(&ctx(0.0, 1.0), false, c, w).unwrap() + 1.0).abs() < 1e-12);
        assert!((cosine_length_reward(&ctx(64.0, 1.0), false, c, w).unwrap() - 0.0).abs() < 1e-12);
        assert!(cosine_length_reward(&ctx(65.0, 1.0), true, c, w).is_err());
    }

    #[test]
    fn dast_budget_and_bounds() {
        // lambda = 0 at the budget.
        let mut c = group_ctx(20.0, 10.0, 30.0);
        c.mean_correct_len = 20.0;
        c.group_correct = 8;
        assert_eq!(dast_length_reward(&c, true).unwrap(), 0.5);
        assert_eq!(dast_length_reward(&c, false).unwrap(), -0.1);
        // lambda = 2 floors the correct reward at 0.1.
        c.len = 60.0;
        assert_eq!(dast_length_reward(&c, true).unwrap(), 0.1);
        // No correct rollout: budget falls back to the cap.
        let mut none = group_ctx(64.0, 10.0, 30.0);
        none.group_correct = 0;
        none.mean_correct_len = 0.0;
        assert_eq!(dast_length_reward(&none, false).unwrap(), -0.1);
        // Sign always separates correctness.
        for len in [0.0, 5.0, 20.0, 40.0, 64.0] {
            let mut k = group_ctx(len, 0.0, 64.0);
            k.group_correct = 3;
            k.mean_correct_len = 12.0;
            assert!(dast_length_reward(&k, true).unwrap() >= 0.1);
            assert!(dast_length_reward(&k, false).unwrap() <= -0.1);
        }
    }

    #[test]
    fn pilot_rewards() {
        assert_eq!(
            pilot_length_reward(&ctx(64.0, 1.0), true, PilotMode::Lengthy),
            1.0
        );
        assert_eq!(
            pilot_length_reward(&ctx(32.0, 1.0), true, PilotMode::Short),
            0.5
        );
        assert_eq!(
            pilot_length_reward(&ctx(10.0, 1.0), false, PilotMode::Lengthy),
            0.0
        );
        assert_eq!(
            pilot_length_reward(&ctx(10.0, 1.0), false, PilotMode::Short),
            0.0
        );
    }

    #[test]
    fn total_reward_linearity() {
        assert_eq!(total_reward(1.0, 1.0, 0.5, 0.5, 0.5), 1.75);
        assert_eq!(total_reward(0.0, 0.0, 0.0, 0.5, 0.5), 0.0);
        assert_eq!(total_reward(1.0, 0.0, -1.0, 0.5, 0.5), 0.5);
        // Additivity by superposition in each component.
        let base = total_reward(0.3, 0.4, 0.2, 0.5, 0.25);
        let bumped = total_reward(0.3 + 1.0, 0.4, 0.2, 0.5, 0.25);
        assert!((bumped - base - 1.0).abs() < 1e-15);
        let bumped = total_reward(0.3, 0.4 + 2.0, 0.2, 0.5, 0.25);
        assert!((bumped - base - 0.5 * 2.0).abs() < 1e-15);
        let bumped = total_reward(0.3, 0.4, 0.2 + 2.0, 0.5, 0.25);
        assert!((bumped - base - 0.25 * 2.0).abs() < 1e-15);
    }

    /// Independent enumerator of the difficulty-aware reward's branch
    /// table, written as a literal case analysis.
    fn fast_reward_oracle(len: f64, avg: f64, s_d: f64, theta: f64, r_a: f64) -> f64 {
        let easy = s_d < theta;
        let complex = !easy;
        let correct = r_a == 1.0;
        if easy && correct {
            let v = 1.0 - len / avg;
            if v < -1.0 {
                -1.0
            } else {
                v
            }
        } else if complex && !correct {
            let v = len / avg - 1.0;
            if v > 1.0 {
                1.0
            } else {
                v
            }
        } else {
            0.0
        }
    }

    #[test]
    fn fast_reward_matches_branch_oracle() {
        let thetas = [0.0, 0.3, 0.65];
        let avgs = [1.0, 7.5, 40.0];
        let mut checked = 0usize;
        for &theta in &thetas {
            for &avg in &avgs {
                for l in 0..=40 {
                    let len = avg * l as f64 / 10.0;
                    for s_d in [theta - 0.1, theta, theta + 0.1] {
                        for r_a in [0.0, 1.0] {
                            let got =
                                fast_length_reward(&ctx(len, avg), s_d, theta, r_a).unwrap();
                            let want = fast_reward_oracle(len, avg, s_d, theta, r_a);
                            assert_eq!(got, want, "len={len} avg={avg} s_d={s_d} r_a={r_a}");
                            checked += 1;
                        }
                    }
                }
            }
        }
        assert!(checked > 2000);
    }

    #[test]
    fn scheme_dispatch_covers_all() {
        let c = group_ctx(20.0, 10.0, 30.0);
        for scheme in [
            RewardScheme::Fast,
            RewardScheme::Kimi,
            RewardScheme::CosFn,
            RewardScheme::Dast,
            RewardScheme::PilotLengthy,
            RewardScheme::PilotShort,
            RewardScheme::None,
        ] {
            let v = length_reward(scheme, &c, 0.4, 0.5, true).unwrap();
            assert!(v.is_finite());
            assert!((-1.0..=1.0).contains(&v), "{scheme:?} gave {v}");
        }
        assert_eq!(
            length_reward(RewardScheme::None, &c, 0.9, 0.1, false).unwrap(),
            0.0
        );
    }
}
