//! Tasks, evaluatee outputs and gold labels, plus the gold-side statistics:
//! canonical gold preferences, extreme trimming and Krippendorff's alpha.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Verdict;

/// Below this absolute mean a 7-level preference annotation is a tie.
pub const PREFERENCE_TIE_BAND: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    #[default]
    Summarization,
    Qa,
    Generic,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    /// Generation prompt given to evaluatees; `{source}` marks where the source goes.
    pub instruction: String,
    pub source: String,
    #[serde(default)]
    pub task_kind: TaskKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub task_id: String,
    pub evaluatee_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generation_meta: Option<BTreeMap<String, String>>,
}

/// Human ground truth for one output or one pair of outputs.
#[derive(Clone, Debug, PartialEq)]
pub enum GoldLabel {
    Pointwise {
        task_id: String,
        evaluatee_id: String,
        /// Likert level, 1 to 5.
        score: u8,
        annotator_scores: Option<Vec<f64>>,
    },
    Preference {
        task_id: String,
        first_id: String,
        second_id: String,
        verdict: Verdict,
        annotator_scores: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldKind {
    Pointwise,
    Preference,
}

/// Flat line format of a gold label. `score` and `verdict` may be omitted
/// when `annotator_scores` are present; they are then derived on conversion.
///
/// Preference annotator scores use the 7-level convention in which -3 means
/// the first text is strongly better. Conversion flips the sign so that a
/// positive mean favors the first text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub task_id: String,
    pub kind: GoldKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluatee_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_scores: Option<Vec<f64>>,
}

impl GoldLabel {
    pub fn task_id(&self) -> &str {
        match self {
            Self::Pointwise { task_id, .. } | Self::Preference { task_id, .. } => task_id,
        }
    }

    pub fn kind(&self) -> GoldKind {
        match self {
            Self::Pointwise { .. } => GoldKind::Pointwise,
            Self::Preference { .. } => GoldKind::Preference,
        }
    }

    pub fn annotator_scores(&self) -> Option<&[f64]> {
        match self {
            Self::Pointwise {
                annotator_scores, ..
            }
            | Self::Preference {
                annotator_scores, ..
            } => annotator_scores.as_deref(),
        }
    }
}

/// Reduces several annotations to one value: trim one max and one min when
/// there are at least three, then average.
pub fn reduce_annotations(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InvalidInput("no annotator scores".to_string()));
    }
    let kept = if scores.len() >= 3 {
        trim_extremes(scores)?
    } else {
        scores.to_vec()
    };
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Verdict for a reduced preference mean where positive favors the first text.
pub fn verdict_from_preference_mean(mean: f64) -> Verdict {
    if mean.abs() < PREFERENCE_TIE_BAND {
        Verdict::Tie
    } else if mean > 0.0 {
        Verdict::First
    } else {
        Verdict::Second
    }
}

impl TryFrom<GoldRecord> for GoldLabel {
    type Error = Error;

    fn try_from(record: GoldRecord) -> Result<Self> {
        let missing = |field: &str| {
            Error::InvalidInput(format!(
                "{} gold label for task `{}` lacks `{field}`",
                match record.kind {
                    GoldKind::Pointwise => "pointwise",
                    GoldKind::Preference => "preference",
                },
                record.task_id
            ))
        };
        match record.kind {
            GoldKind::Pointwise => {
                let evaluatee_id = record.evaluatee_id.clone().ok_or_else(|| missing("evaluatee_id"))?;
                let score = match (record.score, &record.annotator_scores) {
                    (Some(score), _) => score,
                    (None, Some(raw)) => {
                        let mean = reduce_annotations(raw)?;
                        libm::round(mean).clamp(1.0, 5.0) as u8
                    }
                    (None, None) => return Err(missing("score")),
                };
                if !(1..=5).contains(&score) {
                    return Err(Error::InvalidInput(format!(
                        "pointwise gold score {score} for `{}`/`{evaluatee_id}` is outside 1..=5",
                        record.task_id
                    )));
                }
                Ok(Self::Pointwise {
                    task_id: record.task_id,
                    evaluatee_id,
                    score,
                    annotator_scores: record.annotator_scores,
                })
            }
            GoldKind::Preference => {
                let first_id = record.first_id.clone().ok_or_else(|| missing("first_id"))?;
                let second_id = record.second_id.clone().ok_or_else(|| missing("second_id"))?;
                if first_id == second_id {
                    return Err(Error::InvalidInput(format!(
                        "preference gold for task `{}` compares `{first_id}` with itself",
                        record.task_id
                    )));
                }
                let verdict = match (record.verdict, &record.annotator_scores) {
                    (Some(v), _) => v,
                    (None, Some(raw)) => verdict_from_preference_mean(-reduce_annotations(raw)?),
                    (None, None) => return Err(missing("verdict")),
                };
                Ok(Self::Preference {
                    task_id: record.task_id,
                    first_id,
                    second_id,
                    verdict,
                    annotator_scores: record.annotator_scores,
                })
            }
        }
    }
}

impl From<&GoldLabel> for GoldRecord {
    fn from(label: &GoldLabel) -> Self {
        match label.clone() {
            GoldLabel::Pointwise {
                task_id,
                evaluatee_id,
                score,
                annotator_scores,
            } => GoldRecord {
                task_id,
                kind: GoldKind::Pointwise,
                evaluatee_id: Some(evaluatee_id),
                score: Some(score),
                first_id: None,
                second_id: None,
                verdict: None,
                annotator_scores,
            },
            GoldLabel::Preference {
                task_id,
                first_id,
                second_id,
                verdict,
                annotator_scores,
            } => GoldRecord {
                task_id,
                kind: GoldKind::Preference,
                evaluatee_id: None,
                score: None,
                first_id: Some(first_id),
                second_id: Some(second_id),
                verdict: Some(verdict),
                annotator_scores,
            },
        }
    }
}

/// Validated, immutable collection of tasks, outputs and gold labels.
#[derive(Clone, Debug, Default)]
pub struct Corpus {
    tasks: Vec<Task>,
    task_index: BTreeMap<String, usize>,
    outputs: BTreeMap<String, BTreeMap<String, ModelOutput>>,
    gold: Vec<GoldLabel>,
    pointwise_gold: BTreeMap<(String, String), u8>,
}

impl Corpus {
    pub fn new(tasks: Vec<Task>, outputs: Vec<ModelOutput>, gold: Vec<GoldLabel>) -> Result<Self> {
        let mut task_index = BTreeMap::new();
        for (i, task) in tasks.iter().enumerate() {
            if task.task_id.is_empty() {
                return Err(Error::InvalidInput(format!("task #{} has an empty task_id", i + 1)));
            }
            if task.instruction.trim().is_empty() || task.source.trim().is_empty() {
                return Err(Error::InvalidInput(format!(
                    "task `{}` has an empty instruction or source",
                    task.task_id
                )));
            }
            if task_index.insert(task.task_id.clone(), i).is_some() {
                return Err(Error::Duplicate {
                    kind: "task_id",
                    key: task.task_id.clone(),
                });
            }
        }

        let mut by_task: BTreeMap<String, BTreeMap<String, ModelOutput>> = BTreeMap::new();
        for output in outputs {
            if !task_index.contains_key(&output.task_id) {
                return Err(Error::DanglingReference {
                    kind: "task_id",
                    id: output.task_id.clone(),
                    context: format!("output of `{}`", output.evaluatee_id),
                });
            }
            let slot = by_task.entry(output.task_id.clone()).or_default();
            if slot.contains_key(&output.evaluatee_id) {
                return Err(Error::Duplicate {
                    kind: "output",
                    key: format!("{}/{}", output.task_id, output.evaluatee_id),
                });
            }
            slot.insert(output.evaluatee_id.clone(), output);
        }

        let mut pointwise_gold = BTreeMap::new();
        let mut preference_keys = BTreeMap::new();
        for label in &gold {
            let task_id = label.task_id();
            if !task_index.contains_key(task_id) {
                return Err(Error::DanglingReference {
                    kind: "task_id",
                    id: task_id.to_string(),
                    context: "gold label".to_string(),
                });
            }
            let has_output = |ev: &str| by_task.get(task_id).is_some_and(|m| m.contains_key(ev));
            match label {
                GoldLabel::Pointwise {
                    evaluatee_id, score, ..
                } => {
                    if !has_output(evaluatee_id) {
                        return Err(Error::DanglingReference {
                            kind: "evaluatee_id",
                            id: evaluatee_id.clone(),
                            context: format!("pointwise gold on task `{task_id}`"),
                        });
                    }
                    let key = (task_id.to_string(), evaluatee_id.clone());
                    if pointwise_gold.insert(key, *score).is_some() {
                        return Err(Error::Duplicate {
                            kind: "pointwise gold",
                            key: format!("{task_id}/{evaluatee_id}"),
                        });
                    }
                }
                GoldLabel::Preference {
                    first_id, second_id, ..
                } => {
                    for ev in [first_id, second_id] {
                        if !has_output(ev) {
                            return Err(Error::DanglingReference {
                                kind: "evaluatee_id",
                                id: ev.clone(),
                                context: format!("preference gold on task `{task_id}`"),
                            });
                        }
                    }
                    let (a, b) = ordered(first_id, second_id);
                    let key = (task_id.to_string(), a.to_string(), b.to_string());
                    if preference_keys.insert(key, ()).is_some() {
                        return Err(Error::Duplicate {
                            kind: "preference gold",
                            key: format!("{task_id}/{a}/{b}"),
                        });
                    }
                }
            }
        }

        Ok(Self {
            tasks,
            task_index,
            outputs: by_task,
            gold,
            pointwise_gold,
        })
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn task(&self, task_id: &str) -> Option<&Task> {
        self.task_index.get(task_id).map(|&i| &self.tasks[i])
    }

    pub fn output(&self, task_id: &str, evaluatee_id: &str) -> Option<&ModelOutput> {
        self.outputs.get(task_id)?.get(evaluatee_id)
    }

    /// Outputs on one task, ordered by evaluatee id.
    pub fn outputs_for_task(&self, task_id: &str) -> impl Iterator<Item = &ModelOutput> {
        self.outputs.get(task_id).into_iter().flat_map(|m| m.values())
    }

    pub fn outputs(&self) -> impl Iterator<Item = &ModelOutput> {
        self.outputs.values().flat_map(|m| m.values())
    }

    pub fn output_count(&self) -> usize {
        self.outputs.values().map(BTreeMap::len).sum()
    }

    /// Every evaluatee with at least one output, sorted.
    pub fn evaluatee_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .outputs
            .values()
            .flat_map(|m| m.keys().cloned())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn gold(&self) -> &[GoldLabel] {
        &self.gold
    }

    pub fn pointwise_gold(&self, task_id: &str, evaluatee_id: &str) -> Option<u8> {
        self.pointwise_gold
            .get(&(task_id.to_string(), evaluatee_id.to_string()))
            .copied()
    }

    pub fn has_pointwise_gold(&self) -> bool {
        !self.pointwise_gold.is_empty()
    }

    /// Gold pointwise scores grouped by task, suitable for rank correlation.
    pub fn pointwise_gold_by_task(&self) -> BTreeMap<String, BTreeMap<String, f64>> {
        let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for ((task, ev), score) in &self.pointwise_gold {
            out.entry(task.clone())
                .or_default()
                .insert(ev.clone(), f64::from(*score));
        }
        out
    }

    /// Keeps only the listed evaluatees' outputs and the gold that refers to them.
    pub fn restrict_evaluatees(&self, evaluatee_ids: &[String]) -> Corpus {
        let keep = |ev: &str| evaluatee_ids.iter().any(|e| e == ev);
        let outputs = self
            .outputs()
            .filter(|o| keep(&o.evaluatee_id))
            .cloned()
            .collect();
        let gold = self
            .gold
            .iter()
            .filter(|g| match g {
                GoldLabel::Pointwise { evaluatee_id, .. } => keep(evaluatee_id),
                GoldLabel::Preference {
                    first_id, second_id, ..
                } => keep(first_id) && keep(second_id),
            })
            .cloned()
            .collect();
        Corpus::new(self.tasks.clone(), outputs, gold).expect("subset of a valid corpus is valid")
    }

    /// Replaces the outputs, keeping tasks and gold.
    pub fn with_outputs(&self, outputs: Vec<ModelOutput>) -> Result<Corpus> {
        Corpus::new(self.tasks.clone(), outputs, self.gold.clone())
    }

    /// Canonical gold preferences for this corpus.
    pub fn gold_preferences(&self) -> GoldPreferences {
        GoldPreferences::from_labels(&derive_gold_preferences(self))
    }
}

fn ordered<'a>(x: &'a str, y: &'a str) -> (&'a str, &'a str) {
    if x <= y {
        (x, y)
    } else {
        (y, x)
    }
}

/// Converts pointwise gold into pairwise preferences.
///
/// Every unordered pair of outputs on a task with pointwise labels yields one
/// preference, first id lexicographically smaller. Tied scores defer to an
/// explicit preference label for the pair when one exists. Pairs with only an
/// explicit preference label are passed through.
pub fn derive_gold_preferences(corpus: &Corpus) -> Vec<GoldLabel> {
    let mut explicit: BTreeMap<(String, String, String), Verdict> = BTreeMap::new();
    for label in corpus.gold() {
        if let GoldLabel::Preference {
            task_id,
            first_id,
            second_id,
            verdict,
            ..
        } = label
        {
            let v = if first_id <= second_id {
                *verdict
            } else {
                verdict.flip()
            };
            let (a, b) = ordered(first_id, second_id);
            explicit.insert((task_id.clone(), a.to_string(), b.to_string()), v);
        }
    }

    let mut derived: BTreeMap<(String, String, String), Verdict> = BTreeMap::new();
    for (task_id, scores) in corpus.pointwise_gold_by_task() {
        let ids: Vec<(&String, f64)> = scores.iter().map(|(k, v)| (k, *v)).collect();
        for (i, (a, sa)) in ids.iter().enumerate() {
            for (b, sb) in &ids[i + 1..] {
                let key = (task_id.clone(), (*a).clone(), (*b).clone());
                let mut verdict = Verdict::from_scores(*sa, *sb);
                if verdict == Verdict::Tie {
                    if let Some(v) = explicit.get(&key) {
                        verdict = *v;
                    }
                }
                derived.insert(key, verdict);
            }
        }
    }
    for (key, v) in explicit {
        derived.entry(key).or_insert(v);
    }

    derived
        .into_iter()
        .map(|((task_id, first_id, second_id), verdict)| GoldLabel::Preference {
            task_id,
            first_id,
            second_id,
            verdict,
            annotator_scores: None,
        })
        .collect()
}

/// Lookup table of gold preferences keyed by task and unordered pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GoldPreferences {
    table: BTreeMap<(String, String, String), Verdict>,
}

impl GoldPreferences {
    pub fn from_labels(labels: &[GoldLabel]) -> Self {
        let mut table = BTreeMap::new();
        for label in labels {
            if let GoldLabel::Preference {
                task_id,
                first_id,
                second_id,
                verdict,
                ..
            } = label
            {
                let (a, b) = ordered(first_id, second_id);
                let v = if a == first_id { *verdict } else { verdict.flip() };
                table.insert((task_id.clone(), a.to_string(), b.to_string()), v);
            }
        }
        Self { table }
    }

    /// Gold verdict for `first` against `second` on a task, in that order.
    pub fn get(&self, task_id: &str, first: &str, second: &str) -> Option<Verdict> {
        let (a, b) = ordered(first, second);
        let v = *self
            .table
            .get(&(task_id.to_string(), a.to_string(), b.to_string()))?;
        Some(if a == first { v } else { v.flip() })
    }

    /// Entries as `(task, first, second, verdict)` with `first < second`.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &str, Verdict)> {
        self.table
            .iter()
            .map(|((t, a, b), v)| (t.as_str(), a.as_str(), b.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

/// Drops one occurrence of the maximum and one of the minimum.
pub fn trim_extremes(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "trimming extremes needs at least 3 scores, got {}",
            scores.len()
        )));
    }
    let max_at = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let min_at = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != max_at)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    Ok(scores
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != max_at && *i != min_at)
        .map(|(_, v)| *v)
        .collect())
}

/// Difference function for Krippendorff's alpha.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMetric {
    Nominal,
    Interval,
    Ordinal,
}

/// Krippendorff's alpha over items, each holding the values its annotators gave.
///
/// Items with fewer than two values are not pairable and are ignored.
/// Uses the coincidence-matrix form `1 - D_o / D_e`.
pub fn krippendorff_alpha(items: &[Vec<f64>], metric: AlphaMetric) -> Result<f64> {
    if items.len() < 2 {
        return Err(Error::Degenerate(format!(
            "Krippendorff's alpha needs at least 2 items, got {}",
            items.len()
        )));
    }
    let pairable: Vec<&Vec<f64>> = items.iter().filter(|u| u.len() >= 2).collect();
    if pairable.is_empty() {
        return Err(Error::Degenerate("no item has two or more annotations".to_string()));
    }
    if pairable.iter().flat_map(|u| u.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("annotation values must be finite".to_string()));
    }

    let mut values: Vec<f64> = pairable.iter().flat_map(|u| u.iter().copied()).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let k = values.len();
    let index = |v: f64| values.binary_search_by(|x| x.total_cmp(&v)).unwrap();

    let mut coincidence = alloc::vec![0.0f64; k * k];
    for unit in &pairable {
        let m = unit.len() as f64;
        for (i, &a) in unit.iter().enumerate() {
            for (j, &b) in unit.iter().enumerate() {
                if i != j {
                    coincidence[index(a) * k + index(b)] += 1.0 / (m - 1.0);
                }
            }
        }
    }
    let marginals: Vec<f64> = (0..k)
        .map(|c| (0..k).map(|d| coincidence[c * k + d]).sum())
        .collect();
    let n: f64 = marginals.iter().sum();

    let delta = |c: usize, d: usize| -> f64 {
        match metric {
            AlphaMetric::Nominal => {
                if c == d {
                    0.0
                } else {
                    1.0
                }
            }
            AlphaMetric::Interval => {
                let diff = values[c] - values[d];
                diff * diff
            }
            AlphaMetric::Ordinal => {
                let (lo, hi) = if c <= d { (c, d) } else { (d, c) };
                let between: f64 = marginals[lo..=hi].iter().sum();
                let s = between - (marginals[c] + marginals[d]) / 2.0;
                s * s
            }
        }
    };

    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for d in 0..k {
            let dist = delta(c, d);
            observed += coincidence[c * k + d] * dist;
            expected += marginals[c] * marginals[d] * dist;
        }
    }
    observed /= n;
    expected /= n * (n - 1.0);
    if expected == 0.0 {
        return Err(Error::Degenerate(
            "expected disagreement is zero (all values identical)".to_string(),
        ));
    }
    Ok(1.0 - observed / expected)
}
