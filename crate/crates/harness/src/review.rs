//! Response generation and review job execution.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use peer_eval_core::corpus::{Corpus, GoldPreferences, ModelOutput, Task};
use peer_eval_core::hash::derive_seed;
use peer_eval_core::jobs::{ReviewJob, ReviewRecord};
use peer_eval_core::judgment::parse_judgment;
use peer_eval_core::prompt::{render_generation_prompt, render_prompt_ordered, SectionOrder};
use peer_eval_core::scripted::GoldHint;
use peer_eval_core::PromptSetting;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{BackendPool, CompletionRequest, JudgeContext};
use crate::error::{HarnessError, Result};
use crate::store::{FailureRecord, RecordSink};

/// Applies `f` to every item on up to `workers` threads; results keep item order.
pub fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let done = Mutex::new(Vec::with_capacity(items.len()));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| {
                let mut local = Vec::new();
                loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= items.len() {
                        break;
                    }
                    local.push((i, f(&items[i])));
                }
                done.lock().unwrap().extend(local);
            });
        }
    });
    let mut done = done.into_inner().unwrap();
    done.sort_by_key(|(i, _)| *i);
    done.into_iter().map(|(_, r)| r).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationFailure {
    pub task_id: String,
    pub evaluatee_id: String,
    pub error: String,
}

/// One output per (task, evaluatee) from the evaluatee's backend. Failures
/// are collected and the rest of the run continues.
pub fn generate_responses(
    tasks: &[Task],
    evaluatees: &[String],
    pool: &BackendPool,
    workers: usize,
) -> Result<(Vec<ModelOutput>, Vec<GenerationFailure>)> {
    for e in evaluatees {
        pool.get(e)?;
    }
    let cells: Vec<(&Task, &String)> = tasks.iter().flat_map(|t| evaluatees.iter().map(move |e| (t, e))).collect();
    let results = par_map(&cells, workers, |(task, evaluatee)| {
        let prompt = render_generation_prompt(task);
        let request = CompletionRequest {
            prompt: &prompt,
            namespace: "generate",
            context: None,
        };
        pool.get(evaluatee).expect("checked above").complete(&request)
    });
    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    for ((task, evaluatee), result) in cells.into_iter().zip(results) {
        match result {
            Ok(c) => outputs.push(ModelOutput {
                task_id: task.task_id.clone(),
                evaluatee_id: evaluatee.clone(),
                text: c.text,
                generation_meta: Some(BTreeMap::from([("attempts".to_string(), c.attempts.to_string())])),
            }),
            Err(e) => failures.push(GenerationFailure {
                task_id: task.task_id.clone(),
                evaluatee_id: evaluatee.clone(),
                error: e.to_string(),
            }),
        }
    }
    Ok((outputs, failures))
}

/// Reviewer prompt for a sample of the corpus.
pub fn sample_prompt(
    corpus: &Corpus,
    setting: PromptSetting,
    task_id: &str,
    subject_ids: &[String],
    order: SectionOrder,
) -> Result<String> {
    let task = corpus.task(task_id).ok_or_else(|| {
        HarnessError::Core(peer_eval_core::Error::DanglingReference {
            kind: "task",
            id: task_id.to_string(),
            context: "review job".to_string(),
        })
    })?;
    let outputs = subject_ids
        .iter()
        .map(|s| {
            corpus.output(task_id, s).ok_or_else(|| {
                HarnessError::Core(peer_eval_core::Error::DanglingReference {
                    kind: "output",
                    id: format!("{task_id}/{s}"),
                    context: "review job".to_string(),
                })
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(render_prompt_ordered(setting, task, &outputs, order)?)
}

/// Judging context with the corpus gold for the sample, when there is any.
pub fn judge_context(
    corpus: &Corpus,
    prefs: &GoldPreferences,
    setting: PromptSetting,
    task_id: &str,
    subject_ids: &[String],
) -> JudgeContext {
    let gold = match subject_ids {
        [a, b] => prefs.get(task_id, a, b).map(GoldHint::Preference),
        [a] => corpus.pointwise_gold(task_id, a).map(GoldHint::Level),
        _ => None,
    };
    JudgeContext {
        task_id: task_id.to_string(),
        setting,
        subject_ids: subject_ids.to_vec(),
        gold,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ExecOptions {
    pub workers: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecSummary {
    pub executed: usize,
    pub skipped: usize,
    pub failed: usize,
}

/// Runs every job not already in `done`, in a seeded random order, sending
/// each outcome to `sink`.
pub fn execute_jobs(
    jobs: &[ReviewJob],
    corpus: &Corpus,
    pool: &BackendPool,
    done: &BTreeSet<String>,
    sink: &dyn RecordSink,
    options: ExecOptions,
) -> Result<ExecSummary> {
    let reviewers: BTreeSet<&str> = jobs.iter().map(|j| j.reviewer_id.as_str()).collect();
    for r in reviewers {
        pool.get(r)?;
    }
    let prefs = corpus.gold_preferences();
    let mut pending: Vec<&ReviewJob> = jobs.iter().filter(|j| !done.contains(&j.job_id)).collect();
    let skipped = jobs.len() - pending.len();
    pending.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(options.seed, "review-order")));

    let outcomes = par_map(&pending, options.workers, |job| -> Result<bool> {
        let prompt = sample_prompt(corpus, job.setting, &job.task_id, &job.subject_ids, SectionOrder::SourceFirst)?;
        let context = judge_context(corpus, &prefs, job.setting, &job.task_id, &job.subject_ids);
        let namespace = format!("review-{}", job.setting);
        let request = CompletionRequest {
            prompt: &prompt,
            namespace: &namespace,
            context: Some(&context),
        };
        match pool.get(&job.reviewer_id)?.complete(&request) {
            Ok(c) => {
                sink.record(&ReviewRecord {
                    job: (*job).clone(),
                    judgment: parse_judgment(&c.text, job.setting),
                    latency: c.latency,
                    attempt_count: c.attempts,
                })?;
                Ok(true)
            }
            Err(e) => {
                sink.fail(&FailureRecord {
                    job: (*job).clone(),
                    error: e.to_string(),
                })?;
                Ok(false)
            }
        }
    });
    let mut summary = ExecSummary {
        skipped,
        ..ExecSummary::default()
    };
    for outcome in outcomes {
        if outcome? {
            summary.executed += 1;
        } else {
            summary.failed += 1;
        }
    }
    Ok(summary)
}
