//! Review jobs and the records they produce.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::exam::ReviewerProfile;
use crate::judgment::ParsedJudgment;
use crate::types::PromptSetting;

/// One reviewer judging one sample: a single output or an ordered pair.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReviewJob {
    pub job_id: String,
    pub setting: PromptSetting,
    pub task_id: String,
    pub subject_ids: Vec<String>,
    pub reviewer_id: String,
}

impl ReviewJob {
    pub fn new(setting: PromptSetting, task_id: &str, subject_ids: Vec<String>, reviewer_id: &str) -> Self {
        Self {
            job_id: job_id(setting, task_id, &subject_ids, reviewer_id),
            setting,
            task_id: task_id.into(),
            subject_ids,
            reviewer_id: reviewer_id.into(),
        }
    }
}

fn escape_into(out: &mut String, field: &str) {
    for ch in field.chars() {
        match ch {
            '%' => out.push_str("%25"),
            '/' => out.push_str("%2F"),
            '>' => out.push_str("%3E"),
            c => out.push(c),
        }
    }
}

/// Readable, injective job key: `setting/task/subject[>subject]/reviewer`
/// with `%`, `/` and `>` percent-escaped inside fields.
pub fn job_id(setting: PromptSetting, task_id: &str, subject_ids: &[String], reviewer_id: &str) -> String {
    let mut id = String::from(setting.as_str());
    id.push('/');
    escape_into(&mut id, task_id);
    id.push('/');
    for (i, s) in subject_ids.iter().enumerate() {
        if i > 0 {
            id.push('>');
        }
        escape_into(&mut id, s);
    }
    id.push('/');
    escape_into(&mut id, reviewer_id);
    id
}

/// Outcome of one executed job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewRecord {
    #[serde(flatten)]
    pub job: ReviewJob,
    pub judgment: ParsedJudgment,
    /// Seconds spent on the call; zero for cache hits and scripted reviewers.
    pub latency: f64,
    pub attempt_count: u32,
}

/// Every job for a setting: one per (task, output, reviewer) pointwise, one
/// per (task, ordered pair, reviewer) pairwise. Only passed reviewers take part.
pub fn build_jobs(corpus: &Corpus, reviewers: &[ReviewerProfile], setting: PromptSetting) -> Result<Vec<ReviewJob>> {
    let ids: Vec<&str> = reviewers
        .iter()
        .filter(|r| r.passed)
        .map(|r| r.reviewer_id.as_str())
        .collect();
    if ids.is_empty() {
        return Err(Error::NoPassedReviewers);
    }
    Ok(build_jobs_for(corpus, &ids, setting))
}

/// [`build_jobs`] for an explicit reviewer list.
pub fn build_jobs_for(corpus: &Corpus, reviewer_ids: &[&str], setting: PromptSetting) -> Vec<ReviewJob> {
    let mut jobs = Vec::new();
    for task in corpus.tasks() {
        let t = task.task_id.as_str();
        let evaluatees: Vec<&str> = corpus.outputs_for_task(t).map(|o| o.evaluatee_id.as_str()).collect();
        let mut samples: Vec<Vec<String>> = Vec::new();
        if setting.is_pairwise() {
            for a in &evaluatees {
                for b in &evaluatees {
                    if a != b {
                        samples.push(alloc::vec![String::from(*a), String::from(*b)]);
                    }
                }
            }
        } else {
            samples.extend(evaluatees.iter().map(|e| alloc::vec![String::from(*e)]));
        }
        for subjects in samples {
            for reviewer in reviewer_ids {
                jobs.push(ReviewJob::new(setting, t, subjects.clone(), reviewer));
            }
        }
    }
    jobs
}
