//! Seeded synthetic corpora with planted evaluatee quality, and an in-memory
//! runner for whole scenarios over scripted reviewers.

use std::path::Path;

use peer_eval_core::chair::{aggregate, leaderboard, Aggregation, Leaderboard};
use peer_eval_core::corpus::{Corpus, GoldLabel, ModelOutput, Task, TaskKind};
use peer_eval_core::exam::{build_exam, qualify, ExamResult, ReviewerProfile, WeightScheme, DEFAULT_CLAMP_EPS};
use peer_eval_core::hash::derive_seed;
use peer_eval_core::jobs::{build_jobs_for, ReviewRecord};
use peer_eval_core::scripted::ScriptedConfig;
use peer_eval_core::{PromptSetting, TiePolicy, Verdict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::backend::{BackendPool, BackendSpec};
use crate::error::{HarnessError, Result};
use crate::exam::{restrict_tasks, run_exam};
use crate::io::{write_gold, write_jsonl};
use crate::report::{reviewer_metrics, score_against_gold, Metrics, ReviewerMetrics};
use crate::review::{execute_jobs, ExecOptions};
use crate::store::MemorySink;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GoldMode {
    /// Likert levels `clamp(round(q + noise), 1, 5)`; preferences follow from them.
    Levels,
    /// A strict preference for every pair, from `q + noise` without rounding.
    Preferences,
    None,
}

#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    /// Evaluatee ids with their planted quality.
    pub evaluatees: Vec<(String, f64)>,
    pub tasks: usize,
    pub gold: GoldMode,
    /// Standard deviation of the per-output gold noise.
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(evaluatees: &[(&str, f64)], tasks: usize, seed: u64) -> Self {
        Self {
            evaluatees: evaluatees.iter().map(|(id, q)| (id.to_string(), *q)).collect(),
            tasks,
            gold: GoldMode::Levels,
            noise: 1.0,
            seed,
        }
    }

    /// Evaluatee ids from best to worst planted quality.
    pub fn planted_order(&self) -> Vec<String> {
        let mut ranked = self.evaluatees.clone();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.into_iter().map(|(id, _)| id).collect()
    }

    pub fn task_list(&self) -> Vec<Task> {
        (0..self.tasks)
            .map(|i| Task {
                task_id: format!("t{i:04}"),
                instruction: "Summarize the following document in one sentence.\n\n{source}".into(),
                source: format!("Document {i}: a short synthetic article about topic {}.", i % 17),
                task_kind: TaskKind::Summarization,
            })
            .collect()
    }

    pub fn outputs(&self) -> Vec<ModelOutput> {
        (0..self.tasks)
            .flat_map(|i| {
                self.evaluatees.iter().map(move |(id, _)| ModelOutput {
                    task_id: format!("t{i:04}"),
                    evaluatee_id: id.clone(),
                    text: format!("Summary of document {i} written by {id}."),
                    generation_meta: None,
                })
            })
            .collect()
    }

    pub fn gold_labels(&self) -> Result<Vec<GoldLabel>> {
        let noise = Normal::new(0.0, self.noise).map_err(|e| HarnessError::Config(format!("gold noise: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, "synthetic-gold"));
        let mut labels = Vec::new();
        for i in 0..self.tasks {
            let task_id = format!("t{i:04}");
            let draws: Vec<(&String, f64)> = self
                .evaluatees
                .iter()
                .map(|(id, q)| (id, q + noise.sample(&mut rng)))
                .collect();
            match self.gold {
                GoldMode::Levels => labels.extend(draws.iter().map(|(id, v)| GoldLabel::Pointwise {
                    task_id: task_id.clone(),
                    evaluatee_id: (*id).clone(),
                    score: v.round().clamp(1.0, 5.0) as u8,
                    annotator_scores: None,
                })),
                GoldMode::Preferences => {
                    for (k, (a, va)) in draws.iter().enumerate() {
                        for (b, vb) in &draws[k + 1..] {
                            labels.push(GoldLabel::Preference {
                                task_id: task_id.clone(),
                                first_id: (*a).clone(),
                                second_id: (*b).clone(),
                                verdict: if va >= vb { Verdict::First } else { Verdict::Second },
                                annotator_scores: None,
                            });
                        }
                    }
                }
                GoldMode::None => {}
            }
        }
        Ok(labels)
    }

    pub fn corpus(&self) -> Result<Corpus> {
        Ok(Corpus::new(self.task_list(), self.outputs(), self.gold_labels()?)?)
    }

    /// Writes `tasks.jsonl`, `outputs.jsonl` and (unless gold is off) `gold.jsonl`.
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        write_jsonl(&dir.join("tasks.jsonl"), &self.task_list())?;
        write_jsonl(&dir.join("outputs.jsonl"), &self.outputs())?;
        if self.gold != GoldMode::None {
            write_gold(&dir.join("gold.jsonl"), &self.gold_labels()?)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub corpus: SyntheticSpec,
    /// Reviewer candidates as scripted backends.
    pub candidates: Vec<(String, ScriptedConfig)>,
    pub questioners: Vec<String>,
    pub setting: PromptSetting,
    pub exam_tasks: Option<usize>,
    pub tie_policy: TiePolicy,
    pub seed: u64,
    pub workers: usize,
}

/// Exam results and review records of every candidate. The chair can then be
/// replayed under any qualification policy without calling models again.
pub struct ScenarioRun {
    pub corpus: Corpus,
    pub setting: PromptSetting,
    pub tie_policy: TiePolicy,
    pub exam: Vec<ExamResult>,
    pub records: Vec<ReviewRecord>,
}

pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun> {
    let corpus = scenario.corpus.corpus()?;
    let specs: Vec<BackendSpec> = scenario
        .candidates
        .iter()
        .map(|(id, c)| BackendSpec::scripted(id, c.clone()))
        .collect();
    let pool = BackendPool::from_specs(&specs, scenario.seed, None)?;
    let ids: Vec<String> = scenario.candidates.iter().map(|(id, _)| id.clone()).collect();

    let exam = if scenario.questioners.is_empty() {
        Vec::new()
    } else {
        let exam_corpus = restrict_tasks(&corpus, scenario.exam_tasks)?;
        let paper = build_exam(&exam_corpus, &scenario.questioners, scenario.setting)?;
        run_exam(&paper, &exam_corpus, &ids, &pool, scenario.tie_policy, scenario.workers)?
    };

    let id_refs: Vec<&str> = ids.iter().map(String::as_str).collect();
    let jobs = build_jobs_for(&corpus, &id_refs, scenario.setting);
    let sink = MemorySink::default();
    execute_jobs(
        &jobs,
        &corpus,
        &pool,
        &Default::default(),
        &sink,
        ExecOptions {
            workers: scenario.workers,
            seed: scenario.seed,
        },
    )?;
    let (records, failures) = sink.into_parts();
    if !failures.is_empty() {
        return Err(HarnessError::Other(format!("{} scripted jobs failed", failures.len())));
    }
    Ok(ScenarioRun {
        corpus,
        setting: scenario.setting,
        tie_policy: scenario.tie_policy,
        exam,
        records,
    })
}

impl ScenarioRun {
    pub fn profiles(&self, xi: f64, scheme: WeightScheme) -> Vec<ReviewerProfile> {
        qualify(&self.exam, self.setting, xi, scheme, DEFAULT_CLAMP_EPS)
    }

    /// The chair over the records of passed reviewers only.
    pub fn chair(&self, profiles: &[ReviewerProfile]) -> Result<Aggregation> {
        let passed: Vec<&str> = profiles
            .iter()
            .filter(|p| p.passed)
            .map(|p| p.reviewer_id.as_str())
            .collect();
        let records: Vec<ReviewRecord> = self
            .records
            .iter()
            .filter(|r| passed.contains(&r.job.reviewer_id.as_str()))
            .cloned()
            .collect();
        if records.is_empty() {
            return Err(HarnessError::Refusal("no reviewer passed".into()));
        }
        Ok(aggregate(&records, profiles, self.setting)?)
    }

    pub fn leaderboard(&self, profiles: &[ReviewerProfile]) -> Result<Leaderboard> {
        Ok(leaderboard(&self.chair(profiles)?.scores, self.setting))
    }

    pub fn chair_metrics(&self, profiles: &[ReviewerProfile]) -> Result<Metrics> {
        let agg = self.chair(profiles)?;
        Ok(score_against_gold(&agg.scores, &self.corpus, self.setting, self.tie_policy, false))
    }

    pub fn reviewer_metrics(&self, reviewer_id: &str) -> ReviewerMetrics {
        reviewer_metrics(&self.records, reviewer_id, &self.corpus, self.setting, self.tie_policy)
    }
}
