//! Rollout logs: one JSON object per rollout, one line each.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::RolloutGroup;

/// What gets logged per rollout. Round-trips losslessly through
/// [`read_rollout_log`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutLogRecord {
    pub question_id: String,
    pub length: usize,
    pub correct: bool,
    pub format_ok: bool,
    pub r_a: f64,
    pub r_f: f64,
    pub r_t: f64,
    pub total: f64,
    pub advantage: f64,
}

pub fn records_from_groups(groups: &[RolloutGroup]) -> Vec<RolloutLogRecord> {
    let mut records = Vec::new();
    for g in groups {
        for i in 0..g.rollouts.len() {
            let r = &g.rollouts[i];
            let b = &g.breakdowns[i];
            records.push(RolloutLogRecord {
                question_id: g.question_id.clone(),
                length: r.length,
                correct: r.correct,
                format_ok: r.format_ok,
                r_a: b.r_a,
                r_f: b.r_f,
                r_t: b.r_t,
                total: b.total,
                advantage: g.advantages[i],
            });
        }
    }
    records
}

pub fn write_rollout_log(path: &Path, groups: &[RolloutGroup]) -> Result<()> {
    let mut out = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    append_records(&mut out, &records_from_groups(groups)).map_err(|e| Error::io(path, e))
}

pub fn append_records(
    out: &mut impl Write,
    records: &[RolloutLogRecord],
) -> std::io::Result<()> {
    for record in records {
        let line = serde_json::to_string(record)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_rollout_log(path: &Path) -> Result<Vec<RolloutLogRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(raw).map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}
