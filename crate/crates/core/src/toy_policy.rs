//! An analytically differentiable sequence policy over a four-token
//! vocabulary, plus the synthetic task family it is trained on.
//!
//! A response is a run of THINK tokens (each emitted with the tier's
//! continue probability), a STOP, and one ANSWER token. The think run
//! is capped at `max_len - 2` so the full token sequence never exceeds
//! the generation cap; a capped run gets a forced STOP with
//! log-probability 0. Correctness is Bernoulli in the competence
//! `q(think_len + softplus(care_logit))`, which saturates with reasoning
//! length at a tier-specific rate. Log-probabilities and their gradients
//! in the two logits are exact, which is what makes the optimizer's
//! finite-difference checks meaningful.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::difficulty::Tier;
use crate::error::{Error, Result};
use crate::types::Rollout;

pub const TOKEN_THINK: u32 = 0;
pub const TOKEN_STOP: u32 = 1;
pub const TOKEN_ANSWER_CORRECT: u32 = 2;
pub const TOKEN_ANSWER_WRONG: u32 = 3;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    // ln(1 + e^x), stable on both tails.
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Per-tier parameters: the continue probability is `sigmoid(continue_logit)`
/// and the effort bonus is `softplus(care_logit)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierParams {
    pub continue_logit: f64,
    pub care_logit: f64,
}

/// Policy with independent parameters per difficulty tier.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    tiers: [TierParams; 3],
}

impl Default for ToyPolicy {
    fn default() -> Self {
        // Continue probability ~0.88 (mean response ~9 tokens of the
        // 64-token cap) with a care bonus that starts competence past the
        // steep part of the easy tier's curve. This is the regime where
        // accuracy is roughly length-invariant on easy questions, matching
        // the operating point the length-reward experiments assume.
        let init = TierParams {
            continue_logit: 2.0,
            care_logit: 4.0,
        };
        Self { tiers: [init; 3] }
    }
}

impl ToyPolicy {
    pub fn new(tiers: [TierParams; 3]) -> Result<Self> {
        for t in &tiers {
            if !t.continue_logit.is_finite() || !t.care_logit.is_finite() {
                return Err(Error::InvalidArgument("policy logits must be finite".into()));
            }
        }
        Ok(Self { tiers })
    }

    pub fn params(&self, tier: Tier) -> TierParams {
        self.tiers[tier.index()]
    }

    pub fn params_mut(&mut self, tier: Tier) -> &mut TierParams {
        &mut self.tiers[tier.index()]
    }

    pub fn continue_prob(&self, tier: Tier) -> f64 {
        sigmoid(self.params(tier).continue_logit)
    }

    pub fn care_bonus(&self, tier: Tier) -> f64 {
        softplus(self.params(tier).care_logit)
    }

    /// Flat parameter-name -> value map (`<tier>.<name>` keys).
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let mut map = BTreeMap::new();
        for tier in Tier::ALL {
            let p = self.params(tier);
            map.insert(format!("{tier}.continue_logit"), p.continue_logit);
            map.insert(format!("{tier}.care_logit"), p.care_logit);
        }
        map
    }

    pub fn from_map(map: &BTreeMap<String, f64>) -> Result<Self> {
        let mut tiers = [TierParams {
            continue_logit: 0.0,
            care_logit: 0.0,
        }; 3];
        for tier in Tier::ALL {
            for (field, is_continue) in [("continue_logit", true), ("care_logit", false)] {
                let key = format!("{tier}.{field}");
                let value = *map
                    .get(&key)
                    .ok_or_else(|| Error::InvalidArgument(format!("policy map missing {key}")))?;
                let slot = &mut tiers[tier.index()];
                if is_continue {
                    slot.continue_logit = value;
                } else {
                    slot.care_logit = value;
                }
            }
        }
        Self::new(tiers)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.to_map())
            .map_err(|e| Error::InvalidArgument(format!("serialize policy: {e}")))?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: BTreeMap<String, f64> = serde_json::from_str(&text).map_err(|e| Error::Parse {
            line: 1,
            msg: format!("policy file: {e}"),
        })?;
        Self::from_map(&map)
    }
}

/// One tier of the synthetic task family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticTask {
    pub tier: Tier,
    /// Correctness probability with no reasoning at all.
    pub q_min: f64,
    /// Asymptotic correctness probability.
    pub q_max: f64,
    /// Reasoning length at which competence has closed 1 - 1/e of the gap.
    pub l_star: f64,
    /// Base seed for this tier's texture generator.
    pub image_seed: u64,
}

/// The three tasks, indexable by tier.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskTable {
    tasks: [SyntheticTask; 3],
}

impl TaskTable {
    /// Tasks must come in tier order with strictly increasing
    /// characteristic lengths: harder questions demand longer reasoning.
    pub fn new(tasks: [SyntheticTask; 3]) -> Result<Self> {
        for (task, tier) in tasks.iter().zip(Tier::ALL) {
            if task.tier != tier {
                return Err(Error::InvalidArgument(format!(
                    "task table slot {tier} holds a {} task",
                    task.tier
                )));
            }
            if !(0.0..=1.0).contains(&task.q_min) || !(0.0..=1.0).contains(&task.q_max) {
                return Err(Error::InvalidArgument(
                    "competence bounds must lie in [0,1]".into(),
                ));
            }
            if task.q_min > task.q_max {
                return Err(Error::InvalidArgument("q_min must not exceed q_max".into()));
            }
            if !(task.l_star > 0.0) {
                return Err(Error::InvalidArgument("l_star must be positive".into()));
            }
        }
        if !(tasks[0].l_star < tasks[1].l_star && tasks[1].l_star < tasks[2].l_star) {
            return Err(Error::InvalidArgument(
                "characteristic lengths must increase with tier".into(),
            ));
        }
        Ok(Self { tasks })
    }

    pub fn get(&self, tier: Tier) -> &SyntheticTask {
        &self.tasks[tier.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = &SyntheticTask> {
        self.tasks.iter()
    }
}

/// Easy questions are nearly solvable without thinking; hard ones demand
/// long reasoning. Characteristic lengths are ordered Easy < Medium < Hard.
pub fn default_task_table() -> TaskTable {
    TaskTable::new([
        SyntheticTask {
            tier: Tier::Easy,
            q_min: 0.6,
            q_max: 0.9,
            l_star: 2.0,
            image_seed: 101,
        },
        SyntheticTask {
            tier: Tier::Medium,
            q_min: 0.3,
            q_max: 0.85,
            l_star: 6.0,
            image_seed: 202,
        },
        SyntheticTask {
            tier: Tier::Hard,
            q_min: 0.05,
            q_max: 0.7,
            l_star: 16.0,
            image_seed: 303,
        },
    ])
    .expect("default tasks are valid")
}

/// `q(L) = q_min + (q_max - q_min) * (1 - exp(-L / l_star))`.
pub fn competence(len: f64, task: &SyntheticTask) -> f64 {
    task.q_min + (task.q_max - task.q_min) * (1.0 - (-len / task.l_star).exp())
}

/// Think-token count of a toy rollout (token count minus STOP and ANSWER).
pub fn think_len(rollout: &Rollout) -> usize {
    rollout.tokens.len().saturating_sub(2)
}

fn think_cap(max_len: usize) -> usize {
    debug_assert!(max_len >= 2, "max_len must leave room for STOP and ANSWER");
    max_len.saturating_sub(2)
}

/// Samples one response with behavior driven by `old` (the rollout policy),
/// filling the three log-probability sequences from `policy`, `old`, and
/// `reference` respectively.
pub fn sample_response(
    policy: &ToyPolicy,
    old: &ToyPolicy,
    reference: &ToyPolicy,
    task: &SyntheticTask,
    max_len: usize,
    rng: &mut impl Rng,
) -> Rollout {
    let cap = think_cap(max_len);
    let p = old.continue_prob(task.tier);
    let mut thinks = 0usize;
    while thinks < cap && rng.gen::<f64>() < p {
        thinks += 1;
    }
    let effective = thinks as f64 + old.care_bonus(task.tier);
    let q = competence(effective, task);
    let correct = rng.gen::<f64>() < q;

    let mut tokens = vec![TOKEN_THINK; thinks];
    tokens.push(TOKEN_STOP);
    tokens.push(if correct {
        TOKEN_ANSWER_CORRECT
    } else {
        TOKEN_ANSWER_WRONG
    });

    let length = tokens.len();
    let mut rollout = Rollout {
        tokens,
        logp_new: Vec::new(),
        logp_old: Vec::new(),
        logp_ref: Vec::new(),
        length,
        correct,
        format_ok: true,
    };
    rollout.logp_new = token_logps(policy, &rollout, task, max_len);
    rollout.logp_old = token_logps(old, &rollout, task, max_len);
    rollout.logp_ref = token_logps(reference, &rollout, task, max_len);
    rollout
}

/// Per-token log-probabilities of a fixed rollout under `policy`. A
/// truncated think run (at the cap) has a forced STOP with log-prob 0.
pub fn token_logps(
    policy: &ToyPolicy,
    rollout: &Rollout,
    task: &SyntheticTask,
    max_len: usize,
) -> Vec<f64> {
    let thinks = think_len(rollout);
    let truncated = thinks >= think_cap(max_len);
    let params = policy.params(task.tier);
    let ln_p = -softplus(-params.continue_logit); // ln sigmoid(x)
    let ln_1mp = -softplus(params.continue_logit); // ln (1 - sigmoid(x))
    let q = competence(thinks as f64 + policy.care_bonus(task.tier), task);

    let mut logps = vec![ln_p; thinks];
    logps.push(if truncated { 0.0 } else { ln_1mp });
    logps.push(if rollout.correct {
        q.ln()
    } else {
        (1.0 - q).ln()
    });
    logps
}

/// Total log-probability of the rollout under `policy`.
pub fn rollout_logprob(
    policy: &ToyPolicy,
    rollout: &Rollout,
    task: &SyntheticTask,
    max_len: usize,
) -> f64 {
    token_logps(policy, rollout, task, max_len).iter().sum()
}

/// Per-token gradient of the log-probability in the tier's
/// (continue_logit, care_logit).
pub fn token_grads(
    policy: &ToyPolicy,
    rollout: &Rollout,
    task: &SyntheticTask,
    max_len: usize,
) -> Vec<(f64, f64)> {
    let thinks = think_len(rollout);
    let truncated = thinks >= think_cap(max_len);
    let params = policy.params(task.tier);
    let p = sigmoid(params.continue_logit);

    // Competence path: q depends on the care bonus through the effective
    // length x = thinks + softplus(care_logit).
    let x = thinks as f64 + softplus(params.care_logit);
    let q = competence(x, task);
    let dq_dx = (task.q_max - task.q_min) * (-x / task.l_star).exp() / task.l_star;
    let dx_dcare = sigmoid(params.care_logit);
    let dlogq_dcare = if rollout.correct {
        dq_dx * dx_dcare / q
    } else {
        -dq_dx * dx_dcare / (1.0 - q)
    };

    let mut grads = vec![(1.0 - p, 0.0); thinks];
    grads.push(if truncated { (0.0, 0.0) } else { (-p, 0.0) });
    grads.push((0.0, dlogq_dcare));
    grads
}

/// Gradient of the rollout's total log-probability.
pub fn rollout_grad(
    policy: &ToyPolicy,
    rollout: &Rollout,
    task: &SyntheticTask,
    max_len: usize,
) -> (f64, f64) {
    token_grads(policy, rollout, task, max_len)
        .iter()
        .fold((0.0, 0.0), |acc, g| (acc.0 + g.0, acc.1 + g.1))
}
