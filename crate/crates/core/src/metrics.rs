//! Meta-evaluation against gold: preference agreement and per-task rank
//! correlation (Kendall's tau-b, Spearman).

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::chair::AggregateScore;
use crate::corpus::GoldPreferences;
use crate::error::{Error, Result};
use crate::jobs::ReviewRecord;
use crate::types::{PromptSetting, TiePolicy, Verdict};

fn check_lengths(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "rank correlation needs at least 2 observations, got {}",
            x.len()
        )));
    }
    Ok(())
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Kendall's tau-b by pair counting:
/// `(C - D) / sqrt((C + D + Tx) (C + D + Ty))`, where `Tx` counts pairs tied
/// only in `x` and `Ty` pairs tied only in `y`.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            match (sign(x[i] - x[j]), sign(y[i] - y[j])) {
                (0, 0) => {}
                (0, _) => tied_x += 1,
                (_, 0) => tied_y += 1,
                (a, b) if a == b => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let cd = (concordant + discordant) as f64;
    let denom = libm::sqrt((cd + tied_x as f64) * (cd + tied_y as f64));
    if denom == 0.0 {
        return Err(Error::Degenerate("Kendall's tau is undefined for all-tied input".to_string()));
    }
    Ok((concordant as f64 - discordant as f64) / denom)
}

/// Ranks starting at 1, ties sharing the average of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1 ..= end.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths(x, y)?;
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("Spearman's rho is undefined for all-tied input".to_string()));
    }
    Ok(sxy / libm::sqrt(sxx * syy))
}

/// Model verdicts keyed by task and ordered pair.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PreferenceTable {
    table: BTreeMap<(String, String, String), Verdict>,
}

impl PreferenceTable {
    pub fn insert(&mut self, task_id: &str, first: &str, second: &str, verdict: Verdict) {
        self.table
            .insert((task_id.into(), first.into(), second.into()), verdict);
    }

    pub fn get(&self, task_id: &str, first: &str, second: &str) -> Option<Verdict> {
        self.table
            .get(&(task_id.to_string(), first.to_string(), second.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Verdict for the unordered pair `{a, b}` oriented as `a` vs `b`.
    /// The two orders are reconciled: agreement keeps the verdict, conflict is a tie.
    pub fn reconciled(&self, task_id: &str, a: &str, b: &str) -> Option<Verdict> {
        let forward = self.get(task_id, a, b);
        let backward = self.get(task_id, b, a).map(Verdict::flip);
        match (forward, backward) {
            (Some(f), Some(r)) if f == r => Some(f),
            (Some(_), Some(_)) => Some(Verdict::Tie),
            (f, r) => f.or(r),
        }
    }

    /// Pairwise aggregate verdicts, or preferences implied by pointwise
    /// aggregate scores between outputs of the same task.
    pub fn from_aggregates(scores: &[AggregateScore]) -> Self {
        let mut table = Self::default();
        let mut pointwise: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
        for s in scores {
            match (s.subject_ids.as_slice(), s.verdict, s.score) {
                ([a, b], Some(v), _) => table.insert(&s.task_id, a, b, v),
                ([a], _, Some(score)) => pointwise.entry(&s.task_id).or_default().push((a, score)),
                _ => {}
            }
        }
        table.add_pointwise(pointwise);
        table
    }

    /// A single reviewer's own verdicts: its pairwise answers, or the
    /// preferences implied by its raw ratings.
    pub fn from_reviewer(records: &[ReviewRecord], reviewer_id: &str) -> Self {
        let mut table = Self::default();
        let mut pointwise: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
        for r in records.iter().filter(|r| r.job.reviewer_id == reviewer_id) {
            match (r.job.subject_ids.as_slice(), r.judgment.preference, r.judgment.rating) {
                ([a, b], Some(c), _) => table.insert(&r.job.task_id, a, b, c.verdict()),
                ([a], _, Some(rating)) => pointwise
                    .entry(&r.job.task_id)
                    .or_default()
                    .push((a, f64::from(rating))),
                _ => {}
            }
        }
        table.add_pointwise(pointwise);
        table
    }

    fn add_pointwise(&mut self, by_task: BTreeMap<&str, Vec<(&str, f64)>>) {
        for (task, scored) in by_task {
            for (a, sa) in &scored {
                for (b, sb) in &scored {
                    if a != b {
                        self.insert(task, a, b, Verdict::from_scores(*sa, *sb));
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub agreement: f64,
    pub n_pairs_used: usize,
}

/// Fraction of gold pairs on which the model's reconciled verdict matches.
pub fn agreement(predicted: &PreferenceTable, gold: &GoldPreferences, tie_policy: TiePolicy) -> Result<AgreementResult> {
    let mut credit = 0.0;
    let mut used = 0usize;
    for (task, a, b, g) in gold.iter() {
        let Some(model) = predicted.reconciled(task, a, b) else {
            continue;
        };
        if let Some(c) = tie_policy.credit(model, g) {
            credit += c;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::Degenerate("no pair is covered by both model and gold".to_string()));
    }
    Ok(AgreementResult {
        agreement: credit / used as f64,
        n_pairs_used: used,
    })
}

/// Scores per task, per evaluatee.
pub type TaskScores = BTreeMap<String, BTreeMap<String, f64>>;

/// Per-task model scores from aggregates: the pointwise score, or for
/// pairwise aggregates the evaluatee's win share within the task.
pub fn task_scores(scores: &[AggregateScore], setting: PromptSetting) -> TaskScores {
    let mut sums: BTreeMap<String, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for s in scores {
        let slot = sums.entry(s.task_id.clone()).or_default();
        if setting.is_pairwise() {
            if let ([a, b], Some(v)) = (s.subject_ids.as_slice(), s.verdict) {
                let (wa, wb) = match v {
                    Verdict::First => (1.0, 0.0),
                    Verdict::Second => (0.0, 1.0),
                    Verdict::Tie => (0.5, 0.5),
                };
                for (id, w) in [(a, wa), (b, wb)] {
                    let e = slot.entry(id.clone()).or_default();
                    e.0 += w;
                    e.1 += 1;
                }
            }
        } else if let ([a], Some(score)) = (s.subject_ids.as_slice(), s.score) {
            let e = slot.entry(a.clone()).or_default();
            e.0 += score;
            e.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(t, m)| (t, m.into_iter().map(|(e, (s, n))| (e, s / n as f64)).collect()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskCorrelation {
    pub task_id: String,
    pub kendall_tau: f64,
    pub spearman: f64,
    pub evaluatees: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub mean_kendall_tau: f64,
    pub mean_spearman: f64,
    pub per_task: Vec<TaskCorrelation>,
    /// Tasks skipped because a side was all tied or had fewer than two evaluatees.
    pub skipped_tasks: usize,
}

/// Correlates model and gold scores within each task and averages over tasks.
pub fn per_task_mean_correlations(model: &TaskScores, gold: &TaskScores) -> Result<CorrelationSummary> {
    let mut per_task = Vec::new();
    let mut skipped = 0;
    for (task, gold_scores) in gold {
        let Some(model_scores) = model.get(task) else {
            continue;
        };
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for (ev, g) in gold_scores {
            if let Some(m) = model_scores.get(ev) {
                xs.push(*m);
                ys.push(*g);
            }
        }
        match (kendall_tau_b(&xs, &ys), spearman(&xs, &ys)) {
            (Ok(tau), Ok(rho)) => per_task.push(TaskCorrelation {
                task_id: task.clone(),
                kendall_tau: tau,
                spearman: rho,
                evaluatees: xs.len(),
            }),
            _ => skipped += 1,
        }
    }
    if per_task.is_empty() {
        return Err(Error::Degenerate(
            "no task has two or more untied evaluatees on both sides".to_string(),
        ));
    }
    let n = per_task.len() as f64;
    Ok(CorrelationSummary {
        mean_kendall_tau: per_task.iter().map(|t| t.kendall_tau).sum::<f64>() / n,
        mean_spearman: per_task.iter().map(|t| t.spearman).sum::<f64>() / n,
        per_task,
        skipped_tasks: skipped,
    })
}
