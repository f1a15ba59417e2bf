//! Append-only record store and failure manifest.
//!
//! Records are appended one JSON line at a time as jobs finish, so an
//! interrupted run loses at most the jobs in flight. On resume a torn last
//! line is dropped. When a run ends the store is rewritten sorted by job id,
//! which makes its bytes independent of execution order.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use peer_eval_core::jobs::{ReviewJob, ReviewRecord};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::io::write_jsonl;

/// A job that could not be completed, in the record line format plus an error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    #[serde(flatten)]
    pub job: ReviewJob,
    pub error: String,
}

/// Where finished jobs go.
pub trait RecordSink: Sync {
    fn record(&self, record: &ReviewRecord) -> Result<()>;
    fn fail(&self, failure: &FailureRecord) -> Result<()>;
}

/// In-memory sink for library use and tests.
#[derive(Default)]
pub struct MemorySink {
    pub records: Mutex<Vec<ReviewRecord>>,
    pub failures: Mutex<Vec<FailureRecord>>,
}

impl MemorySink {
    pub fn into_parts(self) -> (Vec<ReviewRecord>, Vec<FailureRecord>) {
        let mut records = self.records.into_inner().unwrap();
        let mut failures = self.failures.into_inner().unwrap();
        records.sort_by(|a, b| a.job.job_id.cmp(&b.job.job_id));
        failures.sort_by(|a, b| a.job.job_id.cmp(&b.job.job_id));
        (records, failures)
    }
}

impl RecordSink for MemorySink {
    fn record(&self, record: &ReviewRecord) -> Result<()> {
        self.records.lock().unwrap().push(record.clone());
        Ok(())
    }

    fn fail(&self, failure: &FailureRecord) -> Result<()> {
        self.failures.lock().unwrap().push(failure.clone());
        Ok(())
    }
}

/// Reads a record file, keeping the first record per job id. A last line
/// without its newline that fails to parse is an interrupted write and is
/// skipped; any other bad line is an error.
pub fn read_records(path: &Path) -> Result<Vec<ReviewRecord>> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut seen = BTreeMap::new();
    let mut line = String::new();
    let mut number = 0;
    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| HarnessError::io(path, e))?;
        if n == 0 {
            break;
        }
        number += 1;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ReviewRecord>(&line) {
            Ok(r) => {
                seen.entry(r.job.job_id.clone()).or_insert(r);
            }
            Err(_) if !line.ends_with('\n') => break,
            Err(e) => {
                return Err(HarnessError::Parse {
                    path: path.display().to_string(),
                    line: number,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(seen.into_values().collect())
}

pub struct RecordStore {
    path: PathBuf,
    failures_path: PathBuf,
    writer: Mutex<File>,
    failures: Mutex<Vec<FailureRecord>>,
}

impl RecordStore {
    /// Opens the store. With `resume` the records already present are
    /// returned and kept; otherwise the store starts empty.
    pub fn open(path: &Path, failures_path: &Path, resume: bool) -> Result<(Self, Vec<ReviewRecord>)> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        }
        let existing = if resume && path.exists() {
            let records = read_records(path)?;
            // Drop any torn tail before appending after it.
            write_jsonl(path, &records)?;
            records
        } else {
            File::create(path).map_err(|e| HarnessError::io(path, e))?;
            Vec::new()
        };
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| HarnessError::io(path, e))?;
        Ok((
            Self {
                path: path.to_path_buf(),
                failures_path: failures_path.to_path_buf(),
                writer: Mutex::new(file),
                failures: Mutex::new(Vec::new()),
            },
            existing,
        ))
    }

    /// Sorts and deduplicates the store and writes the failure manifest.
    /// Returns the final records and failures.
    pub fn finish(self) -> Result<(Vec<ReviewRecord>, Vec<FailureRecord>)> {
        drop(self.writer);
        let records = read_records(&self.path)?;
        write_jsonl(&self.path, &records)?;
        let mut failures = self.failures.into_inner().unwrap();
        failures.sort_by(|a, b| a.job.job_id.cmp(&b.job.job_id));
        write_jsonl(&self.failures_path, &failures)?;
        Ok((records, failures))
    }
}

impl RecordSink for RecordStore {
    fn record(&self, record: &ReviewRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record).expect("record serializes");
        line.push(b'\n');
        let mut file = self.writer.lock().unwrap();
        // One write per line keeps concurrent appends whole.
        file.write_all(&line).map_err(|e| HarnessError::io(&self.path, e))
    }

    fn fail(&self, failure: &FailureRecord) -> Result<()> {
        self.failures.lock().unwrap().push(failure.clone());
        Ok(())
    }
}
