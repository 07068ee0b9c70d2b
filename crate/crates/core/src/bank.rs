//! Question bank files: one JSON object per line, images stored as
//! separate binary PGM files referenced by relative path.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pgm;
use crate::types::Question;

#[derive(Serialize, Deserialize)]
struct BankRecord {
    id: String,
    image: String,
    answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_complexity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extrinsic_difficulty: Option<f64>,
}

/// Loads a bank file, resolving image paths relative to the file's
/// directory. Records are returned in file order.
pub fn parse_question_bank(path: &Path) -> Result<Vec<Question>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut questions = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let record: BankRecord = serde_json::from_str(raw).map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        let image = pgm::read_pgm(&base.join(&record.image))?;
        let q = Question {
            id: record.id,
            image,
            answer: record.answer,
            image_complexity: record.image_complexity,
            extrinsic_difficulty: record.extrinsic_difficulty,
        };
        q.validate().map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        questions.push(q);
    }
    Ok(questions)
}

/// Writes `bank.jsonl` at `path` and one PGM per question under
/// `<dir>/<image_subdir>/<id>.pgm`. Cached difficulty scores are written
/// when present so a read round-trips field-by-field.
pub fn write_question_bank(path: &Path, questions: &[Question], image_subdir: &str) -> Result<()> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let image_dir = base.join(image_subdir);
    fs::create_dir_all(&image_dir).map_err(|e| Error::io(&image_dir, e))?;

    let mut out = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for q in questions {
        let rel = format!("{image_subdir}/{}.pgm", q.id);
        pgm::write_pgm(&base.join(&rel), &q.image)?;
        let record = BankRecord {
            id: q.id.clone(),
            image: rel,
            answer: q.answer.clone(),
            image_complexity: q.image_complexity,
            extrinsic_difficulty: q.extrinsic_difficulty,
        };
        let line = serde_json::to_string(&record)
            .map_err(|e| Error::InvalidArgument(format!("serialize bank record: {e}")))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
