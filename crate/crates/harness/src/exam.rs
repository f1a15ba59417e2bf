//! Running the qualification exam and the order-swap check against backends.

use peer_eval_core::corpus::Corpus;
use peer_eval_core::exam::{
    build_exam, order_consistency, qualify, score_agreement, ExamPaper, ExamResult, OrderProbe, ReviewerProfile,
    WeightScheme,
};
use peer_eval_core::judgment::{parse_judgment, ParsedJudgment};
use peer_eval_core::prompt::SectionOrder;
use peer_eval_core::{PromptSetting, TiePolicy};

use crate::backend::{BackendPool, CompletionRequest, JudgeContext};
use crate::config::{AutoExamPolicy, RunConfig};
use crate::error::Result;
use crate::review::{judge_context, par_map, sample_prompt};

/// The first `n` tasks of the corpus with their outputs and gold.
pub fn restrict_tasks(corpus: &Corpus, n: Option<usize>) -> Result<Corpus> {
    let Some(n) = n.filter(|n| *n < corpus.tasks().len()) else {
        return Ok(corpus.clone());
    };
    let tasks = corpus.tasks()[..n].to_vec();
    let keep = |id: &str| tasks.iter().any(|t| t.task_id == id);
    let outputs = corpus.outputs().filter(|o| keep(&o.task_id)).cloned().collect();
    let gold = corpus.gold().iter().filter(|g| keep(g.task_id())).cloned().collect();
    Ok(Corpus::new(tasks, outputs, gold)?)
}

fn ask(
    pool: &BackendPool,
    reviewer: &str,
    prompt: &str,
    namespace: &str,
    context: &JudgeContext,
) -> Result<ParsedJudgment> {
    let completion = pool.get(reviewer)?.complete(&CompletionRequest {
        prompt,
        namespace,
        context: Some(context),
    })?;
    Ok(parse_judgment(&completion.text, context.setting))
}

/// One candidate's answers to every exam item, in item order. A backend
/// error aborts the exam.
pub fn answer_exam(
    corpus: &Corpus,
    paper: &ExamPaper,
    candidate: &str,
    pool: &BackendPool,
    workers: usize,
) -> Result<Vec<ParsedJudgment>> {
    pool.get(candidate)?;
    let namespace = format!("exam-{}", paper.setting);
    par_map(&paper.items, workers, |item| {
        let subjects = item.subject_ids();
        let prompt = sample_prompt(corpus, paper.setting, item.task_id(), &subjects, SectionOrder::SourceFirst)?;
        let context = JudgeContext {
            task_id: item.task_id().to_string(),
            setting: paper.setting,
            subject_ids: subjects,
            gold: Some(item.gold_hint()),
        };
        ask(pool, candidate, &prompt, &namespace, &context)
    })
    .into_iter()
    .collect()
}

/// Gold-exam agreement of every candidate.
pub fn run_exam(
    paper: &ExamPaper,
    corpus: &Corpus,
    candidates: &[String],
    pool: &BackendPool,
    tie_policy: TiePolicy,
    workers: usize,
) -> Result<Vec<ExamResult>> {
    candidates
        .iter()
        .map(|c| {
            let answers = answer_exam(corpus, paper, c, pool, workers)?;
            Ok(ExamResult {
                reviewer_id: c.clone(),
                agreement: score_agreement(&answers, paper, tie_policy)?,
            })
        })
        .collect()
}

/// Order-swap probes of one candidate over the corpus. Pairwise probes cover
/// every unordered pair of `subjects` per task; pointwise probes cover every
/// output of `subjects`.
pub fn order_probes(
    corpus: &Corpus,
    subjects: &[String],
    candidate: &str,
    setting: PromptSetting,
    pool: &BackendPool,
    workers: usize,
) -> Result<Vec<OrderProbe>> {
    pool.get(candidate)?;
    let mut samples: Vec<(String, Vec<String>)> = Vec::new();
    for task in corpus.tasks() {
        let present: Vec<&String> = subjects
            .iter()
            .filter(|s| corpus.output(&task.task_id, s).is_some())
            .collect();
        if setting.is_pairwise() {
            for (i, a) in present.iter().enumerate() {
                for b in &present[i + 1..] {
                    samples.push((task.task_id.clone(), vec![(*a).clone(), (*b).clone()]));
                }
            }
        } else {
            samples.extend(present.iter().map(|s| (task.task_id.clone(), vec![(*s).clone()])));
        }
    }
    let prefs = corpus.gold_preferences();
    let namespace = format!("auto-exam-{setting}");
    par_map(&samples, workers, |(task_id, subjects)| {
        let (swapped_subjects, swapped_order) = if setting.is_pairwise() {
            (vec![subjects[1].clone(), subjects[0].clone()], SectionOrder::SourceFirst)
        } else {
            (subjects.clone(), SectionOrder::OutputFirst)
        };
        let forward_prompt = sample_prompt(corpus, setting, task_id, subjects, SectionOrder::SourceFirst)?;
        let swapped_prompt = sample_prompt(corpus, setting, task_id, &swapped_subjects, swapped_order)?;
        let forward_ctx = judge_context(corpus, &prefs, setting, task_id, subjects);
        let swapped_ctx = judge_context(corpus, &prefs, setting, task_id, &swapped_subjects);
        Ok(OrderProbe {
            task_id: task_id.clone(),
            subject_ids: subjects.clone(),
            forward: ask(pool, candidate, &forward_prompt, &namespace, &forward_ctx)?,
            swapped: ask(pool, candidate, &swapped_prompt, &namespace, &swapped_ctx)?,
        })
    })
    .into_iter()
    .collect()
}

/// Knobs of the qualification stage.
#[derive(Clone, Debug)]
pub struct QualifyOptions {
    pub setting: PromptSetting,
    pub xi: f64,
    pub eta: f64,
    pub weight_scheme: WeightScheme,
    pub clamp_eps: f64,
    pub tie_policy: TiePolicy,
    pub auto_exam: AutoExamPolicy,
    pub exam_tasks: Option<usize>,
    pub auto_exam_tasks: usize,
    pub workers: usize,
}

impl QualifyOptions {
    pub fn from_config(config: &RunConfig) -> Self {
        Self {
            setting: config.setting,
            xi: config.xi,
            eta: config.eta,
            weight_scheme: config.weight_scheme,
            clamp_eps: config.clamp_eps,
            tie_policy: config.tie_policy,
            auto_exam: config.auto_exam,
            exam_tasks: config.exam_tasks,
            auto_exam_tasks: config.auto_exam_tasks,
            workers: config.workers,
        }
    }
}

/// Profiles for every candidate under the configured exam policy.
pub fn qualify_candidates(
    corpus: &Corpus,
    questioners: &[String],
    candidates: &[String],
    pool: &BackendPool,
    options: &QualifyOptions,
) -> Result<Vec<ReviewerProfile>> {
    let mut profiles = if options.auto_exam == AutoExamPolicy::Only {
        candidates
            .iter()
            .map(|c| ReviewerProfile {
                reviewer_id: c.clone(),
                setting: options.setting,
                exam_agreement: None,
                weight: 0.0,
                passed: false,
                mu: None,
                sigma: None,
                auto_exam_consistency: None,
            })
            .collect()
    } else {
        let exam_corpus = restrict_tasks(corpus, options.exam_tasks)?;
        let paper = build_exam(&exam_corpus, questioners, options.setting)?;
        let results = run_exam(&paper, &exam_corpus, candidates, pool, options.tie_policy, options.workers)?;
        qualify(&results, options.setting, options.xi, options.weight_scheme, options.clamp_eps)
    };
    if options.auto_exam == AutoExamPolicy::Off {
        return Ok(profiles);
    }

    let sample = restrict_tasks(corpus, Some(options.auto_exam_tasks))?;
    let subjects = if questioners.is_empty() {
        sample.evaluatee_ids()
    } else {
        questioners.to_vec()
    };
    for profile in &mut profiles {
        let probes = order_probes(&sample, &subjects, &profile.reviewer_id, options.setting, pool, options.workers)?;
        let consistency = order_consistency(options.setting, &probes)?;
        let consistent = consistency >= options.eta;
        profile.auto_exam_consistency = Some(consistency);
        match options.auto_exam {
            AutoExamPolicy::Only => {
                profile.passed = consistent;
                profile.weight = if consistent { 1.0 } else { 0.0 };
            }
            _ => {
                if !consistent {
                    profile.passed = false;
                    profile.weight = 0.0;
                }
            }
        }
    }
    Ok(profiles)
}
