//! Qualification exam: building the exam paper, scoring candidates against
//! gold, log-odds vote weights and the order-swap consistency check.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::judgment::ParsedJudgment;
use crate::scripted::GoldHint;
use crate::types::{PromptSetting, TiePolicy, Verdict};

/// Default pass mark on exam agreement.
pub const DEFAULT_XI: f64 = 0.60;
/// Default pass mark on order-swap consistency.
pub const DEFAULT_ETA: f64 = 0.55;
/// Default clamp keeping log-odds weights finite.
pub const DEFAULT_CLAMP_EPS: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExamItem {
    Pointwise {
        task_id: String,
        evaluatee_id: String,
        gold_level: u8,
    },
    Pairwise {
        task_id: String,
        first_id: String,
        second_id: String,
        gold: Verdict,
    },
}

impl ExamItem {
    pub fn task_id(&self) -> &str {
        match self {
            Self::Pointwise { task_id, .. } | Self::Pairwise { task_id, .. } => task_id,
        }
    }

    pub fn subject_ids(&self) -> Vec<String> {
        match self {
            Self::Pointwise { evaluatee_id, .. } => alloc::vec![evaluatee_id.clone()],
            Self::Pairwise {
                first_id, second_id, ..
            } => alloc::vec![first_id.clone(), second_id.clone()],
        }
    }

    pub fn gold_hint(&self) -> GoldHint {
        match self {
            Self::Pointwise { gold_level, .. } => GoldHint::Level(*gold_level),
            Self::Pairwise { gold, .. } => GoldHint::Preference(*gold),
        }
    }
}

/// A gold preference between two pointwise exam items, used to score
/// pointwise answers after converting ratings to preferences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub first_item: usize,
    pub second_item: usize,
    pub gold: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExamPaper {
    pub setting: PromptSetting,
    pub items: Vec<ExamItem>,
    /// Pointwise exams only.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<ScoredPair>,
}

impl ExamPaper {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Builds the exam over the questioners' outputs.
///
/// Pairwise exams hold every gold-labeled pair in both orders. Pointwise
/// exams hold one item per gold-scored output and are scored through the
/// gold preferences between outputs of the same task.
pub fn build_exam(corpus: &Corpus, questioner_ids: &[String], setting: PromptSetting) -> Result<ExamPaper> {
    if questioner_ids.is_empty() {
        return Err(Error::InvalidInput("exam needs at least one questioner".to_string()));
    }
    if setting.is_pairwise() && questioner_ids.len() < 2 {
        return Err(Error::InvalidInput(
            "a pairwise exam needs at least two questioners".to_string(),
        ));
    }
    let prefs = corpus.gold_preferences();
    let mut covered: BTreeMap<&str, bool> = questioner_ids.iter().map(|q| (q.as_str(), false)).collect();
    let mut items = Vec::new();
    let mut pairs = Vec::new();

    for task in corpus.tasks() {
        let t = task.task_id.as_str();
        let present: Vec<&String> = questioner_ids
            .iter()
            .filter(|q| corpus.output(t, q).is_some())
            .collect();
        if setting.is_pairwise() {
            for a in &present {
                for b in &present {
                    if a == b {
                        continue;
                    }
                    if let Some(gold) = prefs.get(t, a, b) {
                        covered.insert(a.as_str(), true);
                        items.push(ExamItem::Pairwise {
                            task_id: t.to_string(),
                            first_id: (*a).clone(),
                            second_id: (*b).clone(),
                            gold,
                        });
                    }
                }
            }
        } else {
            let start = items.len();
            let mut scored: Vec<&String> = Vec::new();
            for q in &present {
                if let Some(level) = corpus.pointwise_gold(t, q) {
                    covered.insert(q.as_str(), true);
                    scored.push(q);
                    items.push(ExamItem::Pointwise {
                        task_id: t.to_string(),
                        evaluatee_id: (*q).clone(),
                        gold_level: level,
                    });
                }
            }
            for i in 0..scored.len() {
                for j in i + 1..scored.len() {
                    if let Some(gold) = prefs.get(t, scored[i], scored[j]) {
                        pairs.push(ScoredPair {
                            first_item: start + i,
                            second_item: start + j,
                            gold,
                        });
                    }
                }
            }
        }
    }

    if let Some((q, _)) = covered.iter().find(|(_, c)| !**c) {
        return Err(Error::InvalidInput(format!(
            "questioner `{q}` has no gold labels usable for a {setting} exam"
        )));
    }
    Ok(ExamPaper {
        setting,
        items,
        pairs,
    })
}

/// Fraction of gold-decided exam comparisons a candidate got right.
///
/// Unparseable answers score zero. Pointwise answers are compared as the
/// preference their two ratings imply; equal ratings are a model tie.
pub fn score_agreement(answers: &[ParsedJudgment], exam: &ExamPaper, tie_policy: TiePolicy) -> Result<f64> {
    if answers.len() != exam.items.len() {
        return Err(Error::LengthMismatch {
            expected: exam.items.len(),
            got: answers.len(),
        });
    }
    let mut credit = 0.0;
    let mut counted = 0usize;
    if exam.setting.is_pairwise() {
        for (item, answer) in exam.items.iter().zip(answers) {
            let ExamItem::Pairwise { gold, .. } = item else {
                return Err(Error::InvalidInput("pointwise item in a pairwise exam".to_string()));
            };
            if !tie_policy.counts_gold(*gold) {
                continue;
            }
            counted += 1;
            if let Some(choice) = answer.preference {
                credit += tie_policy.credit(choice.verdict(), *gold).unwrap_or(0.0);
            }
        }
    } else {
        for pair in &exam.pairs {
            if !tie_policy.counts_gold(pair.gold) {
                continue;
            }
            counted += 1;
            let (Some(a), Some(b)) = (answers[pair.first_item].rating, answers[pair.second_item].rating) else {
                continue;
            };
            let model = Verdict::from_scores(f64::from(a), f64::from(b));
            credit += tie_policy.credit(model, pair.gold).unwrap_or(0.0);
        }
    }
    if counted == 0 {
        return Err(Error::Degenerate("exam has no gold-decided comparisons".to_string()));
    }
    Ok(credit / counted as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    #[default]
    LogOdds,
    Uniform,
}

/// Vote weight from exam agreement: `ln(p / (1 - p))` with `p` clamped to
/// `[clamp_eps, 1 - clamp_eps]`, or 1 for the uniform scheme.
pub fn compute_weight(agreement: f64, scheme: WeightScheme, clamp_eps: f64) -> f64 {
    match scheme {
        WeightScheme::Uniform => 1.0,
        WeightScheme::LogOdds => {
            let eps = clamp_eps.clamp(f64::MIN_POSITIVE, 0.5);
            let p = agreement.clamp(eps, 1.0 - eps);
            libm::log(p / (1.0 - p))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewerProfile {
    pub reviewer_id: String,
    pub setting: PromptSetting,
    /// Exam agreement; absent when the reviewer was only auto-examined without gold.
    #[serde(rename = "p_l")]
    pub exam_agreement: Option<f64>,
    #[serde(rename = "w_l")]
    pub weight: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub auto_exam_consistency: Option<f64>,
}

/// Exam agreement of one candidate, as fed to [`qualify`].
#[derive(Clone, Debug, PartialEq)]
pub struct ExamResult {
    pub reviewer_id: String,
    pub agreement: f64,
}

/// Passes candidates whose agreement reaches `xi` and weights them.
/// Failed candidates get weight 0.
pub fn qualify(
    results: &[ExamResult],
    setting: PromptSetting,
    xi: f64,
    scheme: WeightScheme,
    clamp_eps: f64,
) -> Vec<ReviewerProfile> {
    results
        .iter()
        .map(|r| {
            let passed = r.agreement >= xi;
            ReviewerProfile {
                reviewer_id: r.reviewer_id.clone(),
                setting,
                exam_agreement: Some(r.agreement),
                weight: if passed {
                    compute_weight(r.agreement, scheme, clamp_eps)
                } else {
                    0.0
                },
                passed,
                mu: None,
                sigma: None,
                auto_exam_consistency: None,
            }
        })
        .collect()
}

/// One order-swap probe: the same content judged in two prompt orders.
///
/// Pairwise: `forward` saw `(s1, s2)` and `swapped` saw `(s2, s1)`.
/// Pointwise: `forward` saw source then output, `swapped` output then source.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderProbe {
    pub task_id: String,
    pub subject_ids: Vec<String>,
    pub forward: ParsedJudgment,
    pub swapped: ParsedJudgment,
}

/// Fraction of probes whose implied preference survives the order swap.
///
/// Pairwise probes are consistent when the swapped answer names the same
/// output. Pointwise probes are grouped by task and every pair of outputs is
/// compared under both orders; equal ratings are a tie relation. A probe with
/// an unparseable answer counts as inconsistent.
pub fn order_consistency(setting: PromptSetting, probes: &[OrderProbe]) -> Result<f64> {
    if probes.is_empty() {
        return Err(Error::Degenerate("no order-swap probes".to_string()));
    }
    if probes
        .iter()
        .all(|p| !p.forward.is_parseable() && !p.swapped.is_parseable())
    {
        return Err(Error::Degenerate("every order-swap answer is unparseable".to_string()));
    }
    let (consistent, total) = if setting.is_pairwise() {
        let consistent = probes
            .iter()
            .filter(|p| match (p.forward.preference, p.swapped.preference) {
                (Some(f), Some(s)) => f == s.other(),
                _ => false,
            })
            .count();
        (consistent, probes.len())
    } else {
        let mut by_task: BTreeMap<&str, Vec<&OrderProbe>> = BTreeMap::new();
        for p in probes {
            by_task.entry(p.task_id.as_str()).or_default().push(p);
        }
        let mut consistent = 0;
        let mut total = 0;
        for group in by_task.values() {
            for i in 0..group.len() {
                for j in i + 1..group.len() {
                    total += 1;
                    let (a, b) = (group[i], group[j]);
                    if let (Some(af), Some(bf), Some(asw), Some(bsw)) =
                        (a.forward.rating, b.forward.rating, a.swapped.rating, b.swapped.rating)
                    {
                        let before = Verdict::from_scores(f64::from(af), f64::from(bf));
                        let after = Verdict::from_scores(f64::from(asw), f64::from(bsw));
                        if before == after {
                            consistent += 1;
                        }
                    }
                }
            }
        }
        (consistent, total)
    };
    if total == 0 {
        return Err(Error::Degenerate(
            "pointwise order-swap probes need two outputs on some task".to_string(),
        ));
    }
    Ok(consistent as f64 / total as f64)
}
