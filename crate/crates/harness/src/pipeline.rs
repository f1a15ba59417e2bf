//! Stage commands. Every stage reads its inputs from the output directory,
//! writes fixed-name artifacts back into it and updates `manifest.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use peer_eval_core::chair::{aggregate, leaderboard, AggregateScore, LeaderboardEntry, ReviewerStats};
use peer_eval_core::corpus::{Corpus, GoldLabel};
use peer_eval_core::exam::ReviewerProfile;
use peer_eval_core::jobs::{build_jobs, ReviewRecord};
use peer_eval_core::PromptSetting;
use serde::{Deserialize, Serialize};

use crate::backend::BackendPool;
use crate::config::{AutoExamPolicy, RunConfig};
use crate::error::{HarnessError, Result};
use crate::exam::{qualify_candidates, QualifyOptions};
use crate::io::{load_gold, load_outputs, load_tasks, read_json, read_jsonl, write_json, write_jsonl};
use crate::report::{build_report, console_table, pg_csv, MetricsReport, ReportInputs};
use crate::review::{execute_jobs, generate_responses, ExecOptions, ExecSummary, GenerationFailure};
use crate::store::{read_records, RecordStore};

pub const OUTPUTS: &str = "outputs.jsonl";
pub const GENERATION_FAILURES: &str = "generation_failures.jsonl";
pub const PROFILES: &str = "profiles.jsonl";
pub const RECORDS: &str = "records.jsonl";
pub const FAILURES: &str = "failures.jsonl";
pub const AGGREGATES: &str = "aggregates.jsonl";
pub const LEADERBOARD: &str = "leaderboard.json";
pub const REPORT: &str = "report.json";
pub const PG_MATRIX: &str = "pg_matrix.csv";
pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Complete,
    Partial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub status: StageStatus,
    /// Unix seconds.
    pub finished_at: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub outputs: usize,
    pub generation_failures: usize,
    pub jobs: usize,
    pub records: usize,
    pub unparseable: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub fingerprint: String,
    pub stages: BTreeMap<String, StageEntry>,
    pub counts: Counts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardFile {
    pub setting: PromptSetting,
    pub fingerprint: String,
    pub entries: Vec<LeaderboardEntry>,
    pub reviewer_stats: Vec<ReviewerStats>,
}

/// A loaded config with its backends.
pub struct Run {
    pub config: RunConfig,
    pub pool: BackendPool,
    /// Print stage summaries to stderr.
    pub verbose: bool,
}

impl Run {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let pool = BackendPool::from_specs(&config.backends, config.seed, config.cache_dir.as_deref())
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(Self {
            config,
            pool,
            verbose: false,
        })
    }

    fn say(&self, text: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", text.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.config.artifact(name)
    }

    fn require(&self, name: &str, hint: &str) -> Result<PathBuf> {
        let path = self.path(name);
        if path.exists() {
            Ok(path)
        } else {
            Err(HarnessError::UpstreamMissing {
                path,
                hint: hint.to_string(),
            })
        }
    }

    fn manifest(&self) -> RunManifest {
        let mut m: RunManifest = read_json(&self.path(MANIFEST)).unwrap_or_default();
        let fingerprint = self.config.fingerprint();
        if m.fingerprint != fingerprint {
            m = RunManifest {
                fingerprint,
                ..RunManifest::default()
            };
        }
        m
    }

    fn finish_stage(&self, stage: &str, status: StageStatus, update: impl FnOnce(&mut Counts)) -> Result<()> {
        let mut m = self.manifest();
        update(&mut m.counts);
        let finished_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        m.stages.insert(stage.to_string(), StageEntry { status, finished_at });
        write_json(&self.path(MANIFEST), &m)
    }

    /// The corpus for this run: configured outputs, or outputs generated by
    /// the evaluatee backends (once, then reused from the output directory).
    pub fn corpus(&self, generate: bool) -> Result<Corpus> {
        let tasks = load_tasks(&self.config.tasks)?;
        let outputs = match &self.config.outputs {
            Some(path) => load_outputs(path)?,
            None => {
                let path = self.path(OUTPUTS);
                if path.exists() {
                    load_outputs(&path)?
                } else if generate {
                    self.generate(&tasks)?
                } else {
                    return Err(HarnessError::UpstreamMissing {
                        path,
                        hint: "run the exam or review stage to generate outputs".into(),
                    });
                }
            }
        };
        let gold = match &self.config.gold {
            Some(path) => load_gold(path)?,
            None => Vec::new(),
        };
        let gold = drop_orphan_gold(gold, &outputs);
        let corpus = Corpus::new(tasks, outputs, gold)?;
        Ok(if self.config.evaluatees.is_empty() {
            corpus
        } else {
            corpus.restrict_evaluatees(&self.config.evaluatees)
        })
    }

    fn generate(&self, tasks: &[peer_eval_core::corpus::Task]) -> Result<Vec<peer_eval_core::corpus::ModelOutput>> {
        let (outputs, failures) = generate_responses(tasks, &self.config.evaluatees, &self.pool, self.config.workers)?;
        std::fs::create_dir_all(&self.config.out_dir).map_err(|e| HarnessError::io(&self.config.out_dir, e))?;
        write_jsonl(&self.path(OUTPUTS), &outputs)?;
        write_jsonl::<GenerationFailure>(&self.path(GENERATION_FAILURES), &failures)?;
        self.say(format!("generated {} outputs, {} failures", outputs.len(), failures.len()));
        let status = if failures.is_empty() { StageStatus::Complete } else { StageStatus::Partial };
        self.finish_stage("generate", status, |c| {
            c.outputs = outputs.len();
            c.generation_failures = failures.len();
        })?;
        Ok(outputs)
    }

    pub fn profiles(&self) -> Result<Vec<ReviewerProfile>> {
        read_jsonl(&self.require(PROFILES, "run the exam stage first")?)
    }

    pub fn records(&self) -> Result<Vec<ReviewRecord>> {
        read_records(&self.require(RECORDS, "run the review stage first")?)
    }
}

/// Gold labels whose outputs exist; outputs can go missing when generation fails.
fn drop_orphan_gold(gold: Vec<GoldLabel>, outputs: &[peer_eval_core::corpus::ModelOutput]) -> Vec<GoldLabel> {
    let have: BTreeSet<(&str, &str)> = outputs
        .iter()
        .map(|o| (o.task_id.as_str(), o.evaluatee_id.as_str()))
        .collect();
    let known: BTreeSet<&str> = outputs.iter().map(|o| o.evaluatee_id.as_str()).collect();
    // Only drop labels for known evaluatees, so a genuinely dangling label
    // still fails corpus validation.
    let keep = |t: &str, e: &str| !known.contains(e) || have.contains(&(t, e));
    gold.into_iter()
        .filter(|g| match g {
            GoldLabel::Pointwise {
                task_id, evaluatee_id, ..
            } => keep(task_id, evaluatee_id),
            GoldLabel::Preference {
                task_id,
                first_id,
                second_id,
                ..
            } => keep(task_id, first_id) && keep(task_id, second_id),
        })
        .collect()
}

/// Qualification exam: writes `profiles.jsonl`.
pub fn cmd_exam(run: &Run) -> Result<Vec<ReviewerProfile>> {
    let config = &run.config;
    let corpus = run.corpus(true)?;
    if config.auto_exam != AutoExamPolicy::Only && corpus.gold().is_empty() {
        return Err(HarnessError::Config("the qualification exam needs gold labels".into()));
    }
    let profiles = qualify_candidates(
        &corpus,
        &config.questioners,
        &config.reviewers,
        &run.pool,
        &QualifyOptions::from_config(config),
    )?;
    std::fs::create_dir_all(&config.out_dir).map_err(|e| HarnessError::io(&config.out_dir, e))?;
    write_jsonl(&run.path(PROFILES), &profiles)?;
    for p in &profiles {
        run.say(format!(
            "{:<20} {} p_l={} w_l={:.4} consistency={} {}",
            p.reviewer_id,
            p.setting,
            p.exam_agreement.map_or("-".into(), |v| format!("{v:.4}")),
            p.weight,
            p.auto_exam_consistency.map_or("-".into(), |v| format!("{v:.4}")),
            if p.passed { "PASS" } else { "FAIL" }
        ));
    }
    run.finish_stage("exam", StageStatus::Complete, |_| {})?;
    Ok(profiles)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReviewOutcome {
    pub jobs: usize,
    pub summary: ExecSummary,
    pub records: usize,
    pub failures: usize,
}

/// Review stage: writes `records.jsonl` and `failures.jsonl`. With `resume`
/// the jobs already in the record store are not run again.
pub fn cmd_review(run: &Run, resume: bool) -> Result<ReviewOutcome> {
    let config = &run.config;
    let profiles = run.profiles()?;
    let passed: Vec<ReviewerProfile> = profiles
        .into_iter()
        .filter(|p| p.passed && p.setting == config.setting)
        .collect();
    if passed.is_empty() {
        return Err(HarnessError::Refusal(format!(
            "no reviewer passed the qualification exam for the {} setting (xi = {:.2}); lower xi or add candidates",
            config.setting, config.xi
        )));
    }
    let corpus = run.corpus(true)?;
    let jobs = build_jobs(&corpus, &passed, config.setting)?;
    let (store, existing) = RecordStore::open(&run.path(RECORDS), &run.path(FAILURES), resume)?;
    let done: BTreeSet<String> = existing.into_iter().map(|r| r.job.job_id).collect();
    let summary = execute_jobs(
        &jobs,
        &corpus,
        &run.pool,
        &done,
        &store,
        ExecOptions {
            workers: config.workers,
            seed: config.seed,
        },
    )?;
    let (records, failures) = store.finish()?;
    let unparseable = records.iter().filter(|r| !r.judgment.is_parseable()).count();
    run.say(format!(
        "{} jobs: {} run, {} resumed, {} failed; {} unparseable",
        jobs.len(),
        summary.executed,
        summary.skipped,
        summary.failed,
        unparseable
    ));
    let status = if failures.is_empty() { StageStatus::Complete } else { StageStatus::Partial };
    run.finish_stage("review", status, |c| {
        c.jobs = jobs.len();
        c.records = records.len();
        c.failures = failures.len();
        c.unparseable = unparseable;
    })?;
    Ok(ReviewOutcome {
        jobs: jobs.len(),
        summary,
        records: records.len(),
        failures: failures.len(),
    })
}

/// Chair: writes `aggregates.jsonl` and `leaderboard.json`.
pub fn cmd_chair(run: &Run) -> Result<LeaderboardFile> {
    let config = &run.config;
    let records = run.records()?;
    if records.is_empty() {
        return Err(HarnessError::Other("the record store is empty".into()));
    }
    let profiles = run.profiles()?;
    let agg = aggregate(&records, &profiles, config.setting)?;
    write_jsonl(&run.path(AGGREGATES), &agg.scores)?;
    let board = leaderboard(&agg.scores, config.setting);
    let file = LeaderboardFile {
        setting: config.setting,
        fingerprint: config.fingerprint(),
        entries: board.entries,
        reviewer_stats: agg.reviewer_stats,
    };
    write_json(&run.path(LEADERBOARD), &file)?;
    for e in &file.entries {
        run.say(format!("{:>3}. {:<20} {:.4}", e.rank, e.evaluatee_id, e.score));
    }
    if !agg.unjudged.is_empty() {
        run.say(format!("{} samples had no usable judgment", agg.unjudged.len()));
    }
    run.finish_stage("chair", StageStatus::Complete, |_| {})?;
    Ok(file)
}

/// Report: writes `report.json` and `pg_matrix.csv`.
pub fn cmd_report(run: &Run) -> Result<MetricsReport> {
    let config = &run.config;
    let records = run.records()?;
    let scores: Vec<AggregateScore> = read_jsonl(&run.require(AGGREGATES, "run the chair stage first")?)?;
    let corpus = run.corpus(false)?;
    let report = build_report(ReportInputs {
        corpus: &corpus,
        records: &records,
        scores: &scores,
        setting: config.setting,
        fingerprint: config.fingerprint(),
        tie_policy: config.tie_policy,
        pg_orientation: config.pg_orientation,
        alternative: config.t_test,
        alpha_metric: config.alpha_metric,
    });
    write_json(&run.path(REPORT), &report)?;
    let csv = pg_csv(report.pg.as_ref());
    std::fs::write(run.path(PG_MATRIX), csv).map_err(|e| HarnessError::io(run.path(PG_MATRIX), e))?;
    run.say(console_table(&report));
    run.finish_stage("report", StageStatus::Complete, |_| {})?;
    Ok(report)
}

/// Every stage in order. Returns whether any stage finished partially.
pub fn run_all(run: &Run, resume: bool) -> Result<bool> {
    cmd_exam(run)?;
    let review = cmd_review(run, resume)?;
    cmd_chair(run)?;
    cmd_report(run)?;
    Ok(review.failures > 0 || generation_failed(run))
}

fn generation_failed(run: &Run) -> bool {
    read_jsonl::<GenerationFailure>(&run.path(GENERATION_FAILURES)).is_ok_and(|f| !f.is_empty())
}
