//! JSON Lines reading and writing, and corpus loading.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use peer_eval_core::corpus::{Corpus, GoldLabel, GoldRecord, ModelOutput, Task};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{HarnessError, Result};

/// Reads one JSON value per non-blank line. Unknown keys are ignored;
/// missing required keys are reported with their line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| HarnessError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Writes through a temporary sibling and renames it into place, so readers
/// never see a half-written file.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    let file = File::create(&tmp).map_err(|e| HarnessError::io(&tmp, e))?;
    let mut w = BufWriter::new(file);
    write(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| HarnessError::io(&tmp, e))?;
    drop(w);
    fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<()> {
    write_atomic(path, |w| {
        for item in items {
            serde_json::to_writer(&mut *w, item)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn load_tasks(path: &Path) -> Result<Vec<Task>> {
    read_jsonl(path)
}

pub fn load_outputs(path: &Path) -> Result<Vec<ModelOutput>> {
    read_jsonl(path)
}

pub fn load_gold(path: &Path) -> Result<Vec<GoldLabel>> {
    let records: Vec<GoldRecord> = read_jsonl(path)?;
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            GoldLabel::try_from(r).map_err(|e| HarnessError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_gold(path: &Path, labels: &[GoldLabel]) -> Result<()> {
    let records: Vec<GoldRecord> = labels.iter().map(GoldRecord::from).collect();
    write_jsonl(path, &records)
}

/// Loads and validates a corpus from its three files.
pub fn load_corpus(tasks: &Path, outputs: &Path, gold: Option<&Path>) -> Result<Corpus> {
    let gold = match gold {
        Some(p) => load_gold(p)?,
        None => Vec::new(),
    };
    Ok(Corpus::new(load_tasks(tasks)?, load_outputs(outputs)?, gold)?)
}
