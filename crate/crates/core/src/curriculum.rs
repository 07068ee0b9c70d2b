//! Curriculum sampling over the question bank: binary and continuous
//! slow-to-fast schedules, the fast-to-slow mirror, dynamic filtering, and
//! plain uniform sampling.
//!
//! Filters are pure functions of a question's extrinsic difficulty and the
//! epoch; sampling draws from a caller-owned seeded stream, so a batch is a
//! deterministic function of (bank scores, epoch, rng state).

use rand::Rng;

use crate::config::SamplerStrategy;
use crate::difficulty::{difficulty_tier, Tier};
use crate::error::{Error, Result};
use crate::types::Question;

/// Binary slow-to-fast schedule: the first half of training drops easy
/// questions (`s_ext <= easy_cut`), the second half drops hard ones
/// (`s_ext >= hard_cut`). "First half" is epochs `1..=floor(total/2)`.
pub fn binary_slow_to_fast_filter(
    s_ext: f64,
    epoch: usize,
    total_epochs: usize,
    easy_cut: f64,
    hard_cut: f64,
) -> bool {
    if epoch <= total_epochs / 2 {
        s_ext > easy_cut
    } else {
        s_ext < hard_cut
    }
}

/// Mirror schedule: drop hard questions first, easy ones later.
pub fn fast_to_slow_filter(
    s_ext: f64,
    epoch: usize,
    total_epochs: usize,
    easy_cut: f64,
    hard_cut: f64,
) -> bool {
    if epoch <= total_epochs / 2 {
        s_ext < hard_cut
    } else {
        s_ext > easy_cut
    }
}

/// Keep only the medium band, at every epoch.
pub fn dynamic_filter(s_ext: f64, easy_cut: f64, hard_cut: f64) -> bool {
    easy_cut < s_ext && s_ext < hard_cut
}

/// Probability of drawing an easy question at schedule position `t` of `T`:
/// linear from 0 to `p_max`.
pub fn continuous_easy_probability(t: usize, total: usize, p_max: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::InvalidArgument("schedule needs T >= 1".into()));
    }
    if t > total {
        return Err(Error::InvalidArgument(format!(
            "schedule position {t} beyond total {total}"
        )));
    }
    Ok(p_max * t as f64 / total as f64)
}

fn extrinsic(q: &Question) -> Result<f64> {
    q.extrinsic_difficulty.ok_or_else(|| {
        Error::InvalidArgument(format!(
            "question {} has no extrinsic difficulty; run a warmup pass first",
            q.id
        ))
    })
}

/// Indices of the questions a strategy keeps at this epoch. For the
/// continuous strategy every question is kept (the schedule acts at draw
/// time instead).
pub fn kept_indices(
    bank: &[Question],
    strategy: SamplerStrategy,
    epoch: usize,
    total_epochs: usize,
    easy_cut: f64,
    hard_cut: f64,
) -> Result<Vec<usize>> {
    let mut kept = Vec::with_capacity(bank.len());
    for (i, q) in bank.iter().enumerate() {
        let keep = match strategy {
            SamplerStrategy::None | SamplerStrategy::SlowToFastContinuous => true,
            SamplerStrategy::SlowToFastBinary => {
                binary_slow_to_fast_filter(extrinsic(q)?, epoch, total_epochs, easy_cut, hard_cut)
            }
            SamplerStrategy::FastToSlow => {
                fast_to_slow_filter(extrinsic(q)?, epoch, total_epochs, easy_cut, hard_cut)
            }
            SamplerStrategy::Dynamic => dynamic_filter(extrinsic(q)?, easy_cut, hard_cut),
        };
        if keep {
            kept.push(i);
        }
    }
    Ok(kept)
}

/// Draws a batch of question indices.
///
/// Filter-based strategies sample uniformly from the kept set, without
/// replacement when it is large enough. The continuous strategy fills each
/// slot from the easy tier with probability `p_easy(epoch)` and from the
/// medium-or-hard pool otherwise. Empty kept sets raise a
/// curriculum-exhausted error naming the strategy and epoch.
#[allow(clippy::too_many_arguments)]
pub fn sample_batch(
    bank: &[Question],
    strategy: SamplerStrategy,
    epoch: usize,
    total_epochs: usize,
    batch_size: usize,
    easy_cut: f64,
    hard_cut: f64,
    p_max: f64,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let exhausted = || Error::CurriculumExhausted {
        strategy: strategy.to_string(),
        epoch,
    };
    if bank.is_empty() {
        return Err(exhausted());
    }

    if strategy == SamplerStrategy::SlowToFastContinuous {
        // The schedule position runs 0 at epoch 1 up to T at the final
        // epoch, so the easy fraction starts at zero and ends at p_max.
        let t = epoch.saturating_sub(1);
        let total = total_epochs.saturating_sub(1).max(1);
        let p_easy = continuous_easy_probability(t.min(total), total, p_max)?;

        let mut easy = Vec::new();
        let mut rest = Vec::new();
        for (i, q) in bank.iter().enumerate() {
            let tier = difficulty_tier(1.0 - extrinsic(q)?);
            if tier == Tier::Easy {
                easy.push(i);
            } else {
                rest.push(i);
            }
        }
        let mut batch = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let draw_easy = rng.gen::<f64>() < p_easy;
            let pool: &[usize] = match (draw_easy, easy.is_empty(), rest.is_empty()) {
                (true, false, _) => &easy,
                (true, true, false) => &rest,
                (false, _, false) => &rest,
                (false, false, true) => &easy,
                _ => return Err(exhausted()),
            };
            batch.push(pool[rng.gen_range(0..pool.len())]);
        }
        return Ok(batch);
    }

    let kept = kept_indices(bank, strategy, epoch, total_epochs, easy_cut, hard_cut)?;
    if kept.is_empty() {
        return Err(exhausted());
    }
    if kept.len() >= batch_size {
        // Uniform without replacement: partial Fisher-Yates.
        let mut pool = kept;
        for i in 0..batch_size {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        pool.truncate(batch_size);
        Ok(pool)
    } else {
        // Kept set smaller than the batch: draw with replacement.
        Ok((0..batch_size)
            .map(|_| kept[rng.gen_range(0..kept.len())])
            .collect())
    }
}
