//! The optimization core: group-relative advantages, the clipped surrogate
//! with per-token length normalization, the k3 KL estimator, the
//! difficulty-adaptive KL coefficient, and the one-step policy update for
//! the toy policy.
//!
//! The KL estimator is `r - ln r - 1` with `r = pi_ref / pi_theta` per
//! token: its derivative through `ln pi_theta` is exactly `r - 1`, so the
//! gradient coefficient decomposes into an advantage signal plus
//! `beta_d * (r_ref - 1)`.

use crate::difficulty::Tier;
use crate::error::{Error, Result};
use crate::toy_policy::{self, TaskTable, ToyPolicy};
use crate::types::{RewardBreakdown, Rollout, RolloutGroup};

/// Per-step training diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub mean_ratio: f64,
    /// Fraction of tokens whose clipped term was the binding side of the min.
    pub clip_fraction: f64,
    pub mean_kl: f64,
    pub mean_beta: f64,
    /// Mean per-token gradient coefficient (advantage plus KL pull).
    pub mean_gc: f64,
    /// Negated objective.
    pub surrogate_loss: f64,
}

/// Standardized advantages `(r_i - mean) / (std + 1e-6)` with population
/// std. A group whose rewards are all equal yields exact zeros rather than
/// an error, so a degenerate group never interrupts training.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>> {
    let g = rewards.len();
    if g < 2 {
        return Err(Error::InvalidArgument(format!(
            "advantage normalization needs G >= 2, got {g}"
        )));
    }
    if rewards.iter().all(|&r| r == rewards[0]) {
        return Ok(vec![0.0; g]);
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let var = rewards.iter().map(|&r| (r - mean).powi(2)).sum::<f64>() / g as f64;
    let denom = var.sqrt() + 1e-6;
    Ok(rewards.iter().map(|&r| (r - mean) / denom).collect())
}

/// Assembles a validated group from rollouts and their reward breakdowns.
pub fn build_group(
    question_id: String,
    rollouts: Vec<Rollout>,
    breakdowns: Vec<RewardBreakdown>,
) -> Result<RolloutGroup> {
    if rollouts.len() != breakdowns.len() {
        return Err(Error::InvalidArgument(
            "one reward breakdown per rollout required".into(),
        ));
    }
    let rewards: Vec<f64> = breakdowns.iter().map(|b| b.total).collect();
    let advantages = group_advantages(&rewards)?;
    let group = RolloutGroup {
        question_id,
        rollouts,
        breakdowns,
        rewards,
        advantages,
    };
    group.validate()?;
    Ok(group)
}

/// Difficulty-adaptive KL coefficient, linear in the extrinsic difficulty:
/// `beta_min` at difficulty 1, `beta_max` at difficulty 0. Evaluated as a
/// two-sided lerp so both endpoints are exact.
pub fn adaptive_beta(s_ext: f64, beta_min: f64, beta_max: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&s_ext) {
        return Err(Error::InvalidArgument(format!(
            "extrinsic difficulty {s_ext} outside [0,1]"
        )));
    }
    if !(beta_min > 0.0 && beta_min <= beta_max) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < beta_min <= beta_max, got {beta_min} and {beta_max}"
        )));
    }
    Ok(beta_min * s_ext + beta_max * (1.0 - s_ext))
}

/// Per-token k3 KL estimate `r - ln r - 1` with `r = exp(logp_ref -
/// logp_new)`; nonnegative, zero only at equal log-probabilities.
pub fn kl_value(logp_new: f64, logp_ref: f64) -> f64 {
    let log_ratio = logp_ref - logp_new;
    log_ratio.exp() - log_ratio - 1.0
}

/// `min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv)`.
pub fn clipped_surrogate_term(ratio: f64, advantage: f64, eps: f64) -> Result<f64> {
    if !(ratio > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "probability ratio must be positive, got {ratio}"
        )));
    }
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    Ok((ratio * advantage).min(clipped * advantage))
}

/// Per-token gradient coefficient: `advantage + beta_d * (ratio_ref - 1)`.
pub fn gradient_coefficient(advantage: f64, beta_d: f64, ratio_ref: f64) -> f64 {
    advantage + beta_d * (ratio_ref - 1.0)
}

/// Result of evaluating the objective on a batch of groups.
#[derive(Debug, Clone)]
pub struct GrpoEvaluation {
    pub objective: f64,
    /// Negated objective.
    pub loss: f64,
    /// `token_weights[g][i][t]`: contribution weight of token t of rollout i
    /// in group g, such that the objective gradient is
    /// `sum w * grad(log pi)` over all tokens. Includes the group, rollout,
    /// and length normalizations.
    pub token_weights: Vec<Vec<Vec<f64>>>,
    pub diagnostics: StepDiagnostics,
}

/// Evaluates the clipped, KL-regularized objective:
/// mean over groups of mean over rollouts of
/// `(1/|o_i|) * sum_t [min(ratio*A, clip(ratio)*A) - beta_d * kl_t]`.
///
/// `betas` supplies one KL coefficient per group.
pub fn grpo_objective(groups: &[RolloutGroup], betas: &[f64], clip_eps: f64) -> Result<GrpoEvaluation> {
    if groups.is_empty() {
        return Err(Error::InvalidArgument("objective over empty batch".into()));
    }
    if betas.len() != groups.len() {
        return Err(Error::InvalidArgument(format!(
            "got {} beta values for {} groups",
            betas.len(),
            groups.len()
        )));
    }
    let n_groups = groups.len() as f64;
    let mut objective = 0.0;
    let mut token_weights = Vec::with_capacity(groups.len());

    let mut ratio_sum = 0.0;
    let mut kl_sum = 0.0;
    let mut gc_sum = 0.0;
    let mut clipped_tokens = 0usize;
    let mut token_count = 0usize;

    for (group, &beta) in groups.iter().zip(betas) {
        if group.rollouts.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "group {} has no rollouts",
                group.question_id
            )));
        }
        let g = group.rollouts.len() as f64;
        let mut group_weights = Vec::with_capacity(group.rollouts.len());
        for (rollout, &adv) in group.rollouts.iter().zip(&group.advantages) {
            let len = rollout.tokens.len() as f64;
            let norm = 1.0 / (n_groups * g * len);
            let mut weights = Vec::with_capacity(rollout.tokens.len());
            let mut rollout_term = 0.0;
            for t in 0..rollout.tokens.len() {
                let ratio = (rollout.logp_new[t] - rollout.logp_old[t]).exp();
                if !(ratio > 0.0) || !ratio.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "probability ratio {ratio} in group {}",
                        group.question_id
                    )));
                }
                let unclipped = ratio * adv;
                let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps) * adv;
                let surrogate = unclipped.min(clipped);
                let kl = kl_value(rollout.logp_new[t], rollout.logp_ref[t]);
                rollout_term += surrogate - beta * kl;

                let ratio_ref = (rollout.logp_ref[t] - rollout.logp_new[t]).exp();
                // Gradient through logp_new: the surrogate contributes only
                // when the unclipped side is the binding one.
                let surrogate_grad = if unclipped <= clipped { adv * ratio } else { 0.0 };
                weights.push(norm * (surrogate_grad + beta * (ratio_ref - 1.0)));

                ratio_sum += ratio;
                kl_sum += kl;
                gc_sum += gradient_coefficient(adv, beta, ratio_ref);
                if unclipped > clipped {
                    clipped_tokens += 1;
                }
                token_count += 1;
            }
            objective += rollout_term / (n_groups * g * len);
            group_weights.push(weights);
        }
        token_weights.push(group_weights);
    }

    let tokens = token_count as f64;
    let diagnostics = StepDiagnostics {
        mean_ratio: ratio_sum / tokens,
        clip_fraction: clipped_tokens as f64 / tokens,
        mean_kl: kl_sum / tokens,
        mean_beta: betas.iter().sum::<f64>() / n_groups,
        mean_gc: gc_sum / tokens,
        surrogate_loss: -objective,
    };
    Ok(GrpoEvaluation {
        objective,
        loss: -objective,
        token_weights,
        diagnostics,
    })
}

/// Gradient of the objective in the six policy parameters, as
/// `[tier][continue, care]`, computed by contracting token weights with the
/// per-token log-probability gradients. `logp_new` in the groups must
/// already reflect `policy`.
pub fn objective_gradient(
    policy: &ToyPolicy,
    groups: &[RolloutGroup],
    group_tiers: &[Tier],
    tasks: &TaskTable,
    evaluation: &GrpoEvaluation,
    max_len: usize,
) -> [[f64; 2]; 3] {
    let mut grad = [[0.0; 2]; 3];
    for (g, group) in groups.iter().enumerate() {
        let tier = group_tiers[g];
        let task = tasks.get(tier);
        for (i, rollout) in group.rollouts.iter().enumerate() {
            let token_grads = toy_policy::token_grads(policy, rollout, task, max_len);
            for (t, (d_continue, d_care)) in token_grads.iter().enumerate() {
                let w = evaluation.token_weights[g][i][t];
                grad[tier.index()][0] += w * d_continue;
                grad[tier.index()][1] += w * d_care;
            }
        }
    }
    grad
}

/// Re-evaluates `logp_new` of every rollout under `policy`.
pub fn refresh_logp_new(
    policy: &ToyPolicy,
    groups: &mut [RolloutGroup],
    group_tiers: &[Tier],
    tasks: &TaskTable,
    max_len: usize,
) {
    for (g, group) in groups.iter_mut().enumerate() {
        let task = tasks.get(group_tiers[g]);
        for rollout in &mut group.rollouts {
            rollout.logp_new = toy_policy::token_logps(policy, rollout, task, max_len);
        }
    }
}

/// One gradient-ascent step on the objective. Rollouts must have been
/// generated under the old policy snapshot stored in `logp_old`; their
/// `logp_new` is refreshed under `policy` before evaluation. A non-finite
/// gradient rejects the step.
#[allow(clippy::too_many_arguments)]
pub fn policy_update_step(
    policy: &ToyPolicy,
    groups: &[RolloutGroup],
    group_tiers: &[Tier],
    tasks: &TaskTable,
    betas: &[f64],
    clip_eps: f64,
    learning_rate: f64,
    max_len: usize,
) -> Result<(ToyPolicy, StepDiagnostics)> {
    if group_tiers.len() != groups.len() {
        return Err(Error::InvalidArgument(
            "one tier per group required".into(),
        ));
    }
    let mut working = groups.to_vec();
    refresh_logp_new(policy, &mut working, group_tiers, tasks, max_len);
    let evaluation = grpo_objective(&working, betas, clip_eps)?;
    let grad = objective_gradient(policy, &working, group_tiers, tasks, &evaluation, max_len);

    if grad
        .iter()
        .flatten()
        .any(|v| !v.is_finite())
        || !evaluation.objective.is_finite()
    {
        return Err(Error::NonFinite("gradient or objective".into()));
    }

    let mut updated = policy.clone();
    for tier in Tier::ALL {
        let p = updated.params_mut(tier);
        p.continue_logit += learning_rate * grad[tier.index()][0];
        p.care_logit += learning_rate * grad[tier.index()][1];
    }
    Ok((updated, evaluation.diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::difficulty::Tier;
    use crate::toy_policy::{
        default_task_table, sample_response, TierParams, TOKEN_ANSWER_CORRECT, TOKEN_ANSWER_WRONG,
        TOKEN_STOP, TOKEN_THINK,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn advantages_closed_form() {
        let a = group_advantages(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((a[0] - 3.0f64.sqrt()).abs() < 1e-3);
        for v in &a[1..] {
            assert!((v + 1.0 / 3.0f64.sqrt()).abs() < 1e-3);
        }

        let b = group_advantages(&[1.0, 0.0]).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-3);
        assert!((b[1] + 1.0).abs() < 1e-3);
    }

    #[test]
    fn degenerate_group_is_exactly_zero() {
        assert_eq!(group_advantages(&[1.0; 4]).unwrap(), vec![0.0; 4]);
        assert_eq!(group_advantages(&[0.37, 0.37]).unwrap(), vec![0.0; 2]);
        assert!(group_advantages(&[1.0]).is_err());
    }

    #[test]
    fn advantages_invariant_to_shift_and_scale() {
        let rewards = [0.2, 0.9, 0.4, 0.7, 0.1];
        let base = group_advantages(&rewards).unwrap();
        let transformed: Vec<f64> = rewards.iter().map(|r| 3.0 * r + 11.0).collect();
        let scaled = group_advantages(&transformed).unwrap();
        for (a, b) in base.iter().zip(&scaled) {
            // Exact up to the 1e-6 stabilizer.
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn beta_endpoints_exact_and_monotone() {
        assert_eq!(adaptive_beta(1.0, 0.001, 0.03).unwrap(), 0.001);
        assert_eq!(adaptive_beta(0.0, 0.001, 0.03).unwrap(), 0.03);
        assert!((adaptive_beta(0.5, 0.001, 0.03).unwrap() - 0.0155).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for i in 0..=1000 {
            let b = adaptive_beta(i as f64 / 1000.0, 0.001, 0.03).unwrap();
            assert!(b < prev);
            prev = b;
        }
        assert!(adaptive_beta(1.5, 0.001, 0.03).is_err());
        assert!(adaptive_beta(0.5, 0.0, 0.03).is_err());
        assert!(adaptive_beta(0.5, 0.05, 0.03).is_err());
    }

    #[test]
    fn kl_closed_forms_and_nonnegativity() {
        assert_eq!(kl_value(-1.0, -1.0), 0.0);
        let two = kl_value(-(2.0f64.ln()) - 0.5, -0.5);
        assert!((two - (2.0 - 2.0f64.ln() - 1.0)).abs() < 1e-12);
        let half = kl_value(-0.5, -(2.0f64.ln()) - 0.5);
        assert!((half - (0.5 + 2.0f64.ln() - 1.0)).abs() < 1e-12);
        for i in -50..=50 {
            let d = i as f64 / 10.0;
            assert!(kl_value(-1.0, -1.0 + d) >= 0.0);
        }
    }

    #[test]
    fn clipped_term_cases() {
        assert_eq!(clipped_surrogate_term(1.0, 1.0, 0.2).unwrap(), 1.0);
        assert!((clipped_surrogate_term(1.5, 1.0, 0.2).unwrap() - 1.2).abs() < 1e-15);
        assert!((clipped_surrogate_term(0.5, -1.0, 0.2).unwrap() + 0.8).abs() < 1e-15);
        assert!(clipped_surrogate_term(0.0, 1.0, 0.2).is_err());
        assert!(clipped_surrogate_term(-1.0, 1.0, 0.2).is_err());
    }

    #[test]
    fn gradient_coefficient_cases() {
        assert_eq!(gradient_coefficient(1.0, 0.5, 1.0), 1.0);
        assert!((gradient_coefficient(0.0, 0.03, 2.0) - 0.03).abs() < 1e-15);
        assert!((gradient_coefficient(1.7320, 0.001, 0.5) - 1.7315).abs() < 1e-12);
    }

    fn toy_rollout(thinks: usize, correct: bool, logp: f64) -> Rollout {
        let mut tokens = vec![TOKEN_THINK; thinks];
        tokens.push(TOKEN_STOP);
        tokens.push(if correct {
            TOKEN_ANSWER_CORRECT
        } else {
            TOKEN_ANSWER_WRONG
        });
        let n = tokens.len();
        Rollout {
            tokens,
            logp_new: vec![logp; n],
            logp_old: vec![logp; n],
            logp_ref: vec![logp; n],
            length: n,
            correct,
            format_ok: true,
        }
    }

    fn single_token_group(adv: f64, logp_new: f64, logp_ref: f64) -> RolloutGroup {
        let mut r = toy_rollout(0, true, -0.5);
        r.tokens = vec![TOKEN_ANSWER_CORRECT];
        r.length = 1;
        r.logp_new = vec![logp_new];
        r.logp_old = vec![logp_new];
        r.logp_ref = vec![logp_ref];
        RolloutGroup {
            question_id: "q".into(),
            rollouts: vec![r],
            breakdowns: vec![RewardBreakdown::new(1.0, 0.0, 0.0, 0.5, 0.5)],
            rewards: vec![1.0],
            advantages: vec![adv],
        }
    }

    #[test]
    fn objective_examples() {
        // Zero advantages, zero KL: objective 0.
        let rollouts: Vec<Rollout> = (0..4).map(|_| toy_rollout(1, true, -0.5)).collect();
        let breakdowns = vec![RewardBreakdown::new(1.0, 0.0, 0.0, 0.5, 0.5); 4];
        let group = build_group("q".into(), rollouts, breakdowns).unwrap();
        let eval = grpo_objective(&[group], &[0.03], 0.2).unwrap();
        assert_eq!(eval.objective, 0.0);
        assert_eq!(eval.loss, 0.0);

        // Single rollout, one token, ratio 1, advantage 1, zero KL.
        let g = single_token_group(1.0, -0.5, -0.5);
        let eval = grpo_objective(&[g], &[0.03], 0.2).unwrap();
        assert!((eval.objective - 1.0).abs() < 1e-12);

        // Same with beta = 0.03 against a reference at ratio 2.
        let g = single_token_group(1.0, -0.5 - 2.0f64.ln(), -0.5);
        // logp_old must equal logp_new for ratio 1.
        let eval = grpo_objective(&[g], &[0.03], 0.2).unwrap();
        let kl = 2.0 - 2.0f64.ln() - 1.0;
        assert!((eval.objective - (1.0 - 0.03 * kl)).abs() < 1e-9);
        assert!((eval.objective - 0.99079).abs() < 1e-4);
    }

    #[test]
    fn objective_rejects_bad_batches() {
        assert!(grpo_objective(&[], &[], 0.2).is_err());
        let g = single_token_group(1.0, -0.5, -0.5);
        assert!(grpo_objective(std::slice::from_ref(&g), &[], 0.2).is_err());
        // An overflowing ratio rejects the step instead of poisoning it.
        let mut bad = g.clone();
        bad.rollouts[0].logp_old = vec![-1e6];
        match grpo_objective(&[bad], &[0.03], 0.2) {
            Err(Error::NonFinite(_)) => {}
            other => panic!("expected non-finite rejection, got {other:?}"),
        }
    }

    #[test]
    fn update_noop_on_zero_signal() {
        let tasks = default_task_table();
        let policy = ToyPolicy::default();
        let rollouts: Vec<Rollout> = (0..4).map(|i| toy_rollout(i, true, -0.5)).collect();
        let breakdowns = vec![RewardBreakdown::new(1.0, 0.0, 0.0, 0.5, 0.5); 4];
        let mut group = build_group("q".into(), rollouts, breakdowns).unwrap();
        // Make the reference coincide so KL is identically zero.
        for r in &mut group.rollouts {
            r.logp_ref = toy_policy::token_logps(&policy, r, tasks.get(Tier::Easy), 64);
            r.logp_old = r.logp_ref.clone();
            r.logp_new = r.logp_ref.clone();
        }
        let (updated, diag) = policy_update_step(
            &policy,
            &[group],
            &[Tier::Easy],
            &tasks,
            &[0.03],
            0.2,
            0.01,
            64,
        )
        .unwrap();
        assert_eq!(updated, policy);
        assert_eq!(diag.mean_kl, 0.0);
        assert_eq!(diag.clip_fraction, 0.0);
    }

    #[test]
    fn positive_advantage_rollout_gains_probability() {
        let tasks = default_task_table();
        let task = tasks.get(Tier::Medium);
        let policy = ToyPolicy::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rollouts: Vec<Rollout> = (0..4)
            .map(|_| sample_response(&policy, &policy, &policy, task, 64, &mut rng))
            .collect();
        // Reward exactly one rollout.
        let breakdowns: Vec<RewardBreakdown> = (0..4)
            .map(|i| RewardBreakdown::new(if i == 2 { 1.0 } else { 0.0 }, 0.0, 0.0, 0.5, 0.5))
            .collect();
        let favored = rollouts[2].clone();
        let group = build_group("q".into(), rollouts, breakdowns).unwrap();
        let before = toy_policy::rollout_logprob(&policy, &favored, task, 64);
        let (updated, _) = policy_update_step(
            &policy,
            &[group],
            &[Tier::Medium],
            &tasks,
            &[0.001],
            0.2,
            1e-4,
            64,
        )
        .unwrap();
        let after = toy_policy::rollout_logprob(&updated, &favored, task, 64);
        assert!(
            after >= before,
            "favored rollout lost probability: {before} -> {after}"
        );
    }

    #[test]
    fn kl_only_objective_pulls_toward_reference() {
        let tasks = default_task_table();
        let task = tasks.get(Tier::Hard);
        let mut reference = ToyPolicy::default();
        *reference.params_mut(Tier::Hard) = TierParams {
            continue_logit: 0.2,
            care_logit: -0.4,
        };
        let policy = ToyPolicy::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rollouts: Vec<Rollout> = (0..6)
            .map(|_| sample_response(&policy, &policy, &reference, task, 64, &mut rng))
            .collect();
        // Identical rewards: advantages are exactly zero, leaving only KL.
        let breakdowns = vec![RewardBreakdown::new(1.0, 0.0, 0.0, 0.5, 0.5); 6];
        let group = build_group("q".into(), rollouts, breakdowns).unwrap();

        let mean_kl = |p: &ToyPolicy, groups: &[RolloutGroup]| {
            let mut working = groups.to_vec();
            refresh_logp_new(p, &mut working, &[Tier::Hard], &tasks, 64);
            grpo_objective(&working, &[0.03], 0.2).unwrap().diagnostics.mean_kl
        };
        let before = mean_kl(&policy, std::slice::from_ref(&group));
        let (updated, _) = policy_update_step(
            &policy,
            std::slice::from_ref(&group),
            &[Tier::Hard],
            &tasks,
            &[0.03],
            0.2,
            0.05,
            64,
        )
        .unwrap();
        let after = mean_kl(&updated, &[group]);
        assert!(after < before, "KL did not decrease: {before} -> {after}");
    }

    #[test]
    fn random_groups_satisfy_advantage_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..2000 {
            let g = rng.gen_range(2..=16);
            let rewards: Vec<f64> = (0..g)
                .map(|_| 0.25 * rng.gen_range(0..=8) as f64)
                .collect();
            let adv = group_advantages(&rewards).unwrap();
            let mean = adv.iter().sum::<f64>() / g as f64;
            assert!(mean.abs() <= 1e-9);
            if rewards.iter().all(|&r| r == rewards[0]) {
                assert!(adv.iter().all(|&a| a == 0.0));
            } else {
                let var = adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / g as f64;
                let std = var.sqrt();
                assert!((0.999..=1.0).contains(&std), "std {std}");
            }
        }
    }
}
