//! Meta-evaluation report: agreement and rank correlation against gold for
//! the chair and for every reviewer alone, plus the preference-gap matrix.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use peer_eval_core::bias::{pg_matrix, Alternative, PgMatrix, PgOrientation};
use peer_eval_core::chair::{aggregate, AggregateScore};
use peer_eval_core::corpus::{krippendorff_alpha, AlphaMetric, Corpus};
use peer_eval_core::exam::ReviewerProfile;
use peer_eval_core::jobs::ReviewRecord;
use peer_eval_core::metrics::{agreement, per_task_mean_correlations, task_scores, PreferenceTable, TaskCorrelation};
use peer_eval_core::{PromptSetting, TiePolicy};
use serde::{Deserialize, Serialize};

/// Agreement and rank correlation of one method against gold. Fields are
/// absent when gold does not cover enough samples to compute them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub agreement: Option<f64>,
    pub n_pairs_used: usize,
    pub kendall_tau: Option<f64>,
    pub spearman: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_task: Vec<TaskCorrelation>,
    pub skipped_tasks: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewerMetrics {
    pub reviewer_id: String,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub unparseable: usize,
    pub records: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub setting: PromptSetting,
    pub fingerprint: String,
    pub tie_policy: TiePolicy,
    /// The peer-review chair.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chair: Option<Metrics>,
    /// Each reviewer alone, unweighted.
    pub reviewers: Vec<ReviewerMetrics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gold_alpha: Option<f64>,
    pub notices: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pg: Option<PgMatrix>,
}

/// Metrics of a set of aggregates against the corpus gold.
pub fn score_against_gold(
    scores: &[AggregateScore],
    corpus: &Corpus,
    setting: PromptSetting,
    tie_policy: TiePolicy,
    keep_per_task: bool,
) -> Metrics {
    let gold = corpus.gold_preferences();
    let pair = agreement(&PreferenceTable::from_aggregates(scores), &gold, tie_policy).ok();
    let corr = if corpus.has_pointwise_gold() {
        per_task_mean_correlations(&task_scores(scores, setting), &corpus.pointwise_gold_by_task()).ok()
    } else {
        None
    };
    Metrics {
        agreement: pair.map(|p| p.agreement),
        n_pairs_used: pair.map_or(0, |p| p.n_pairs_used),
        kendall_tau: corr.as_ref().map(|c| c.mean_kendall_tau),
        spearman: corr.as_ref().map(|c| c.mean_spearman),
        skipped_tasks: corr.as_ref().map_or(0, |c| c.skipped_tasks),
        per_task: match corr {
            Some(c) if keep_per_task => c.per_task,
            _ => Vec::new(),
        },
    }
}

fn has_any(m: &Metrics) -> bool {
    m.agreement.is_some() || m.kendall_tau.is_some()
}

/// One reviewer's own metrics: its judgments aggregated alone with unit weight.
pub fn reviewer_metrics(
    records: &[ReviewRecord],
    reviewer_id: &str,
    corpus: &Corpus,
    setting: PromptSetting,
    tie_policy: TiePolicy,
) -> ReviewerMetrics {
    let own: Vec<ReviewRecord> = records
        .iter()
        .filter(|r| r.job.reviewer_id == reviewer_id)
        .cloned()
        .collect();
    let profile = ReviewerProfile {
        reviewer_id: reviewer_id.to_string(),
        setting,
        exam_agreement: None,
        weight: 1.0,
        passed: true,
        mu: None,
        sigma: None,
        auto_exam_consistency: None,
    };
    let metrics = match aggregate(&own, &[profile], setting) {
        Ok(agg) => score_against_gold(&agg.scores, corpus, setting, tie_policy, false),
        Err(_) => Metrics {
            agreement: None,
            n_pairs_used: 0,
            kendall_tau: None,
            spearman: None,
            per_task: Vec::new(),
            skipped_tasks: 0,
        },
    };
    ReviewerMetrics {
        reviewer_id: reviewer_id.to_string(),
        metrics,
        unparseable: own.iter().filter(|r| !r.judgment.is_parseable()).count(),
        records: own.len(),
    }
}

/// Krippendorff's alpha over the per-annotator gold scores, when present.
pub fn gold_alpha(corpus: &Corpus, metric: AlphaMetric) -> Option<f64> {
    let items: Vec<Vec<f64>> = corpus
        .gold()
        .iter()
        .filter_map(|g| g.annotator_scores().map(<[f64]>::to_vec))
        .collect();
    krippendorff_alpha(&items, metric).ok()
}

pub struct ReportInputs<'a> {
    pub corpus: &'a Corpus,
    pub records: &'a [ReviewRecord],
    pub scores: &'a [AggregateScore],
    pub setting: PromptSetting,
    pub fingerprint: String,
    pub tie_policy: TiePolicy,
    pub pg_orientation: PgOrientation,
    pub alternative: Alternative,
    pub alpha_metric: AlphaMetric,
}

pub fn build_report(inputs: ReportInputs<'_>) -> MetricsReport {
    let ReportInputs {
        corpus,
        records,
        scores,
        setting,
        ..
    } = inputs;
    let mut notices = Vec::new();
    let has_gold = !corpus.gold().is_empty();

    let mut reviewer_ids: Vec<String> = records.iter().map(|r| r.job.reviewer_id.clone()).collect();
    reviewer_ids.sort();
    reviewer_ids.dedup();

    let (chair, reviewers) = if has_gold {
        let chair = score_against_gold(scores, corpus, setting, inputs.tie_policy, true);
        if !has_any(&chair) {
            notices.push("gold labels do not overlap the aggregates; metrics skipped".to_string());
        }
        let reviewers = reviewer_ids
            .iter()
            .map(|r| reviewer_metrics(records, r, corpus, setting, inputs.tie_policy))
            .collect();
        (has_any(&chair).then_some(chair), reviewers)
    } else {
        notices.push("no gold labels; metrics skipped".to_string());
        (None, Vec::new())
    };

    // Self-preference needs reviewers that are also evaluatees.
    let evaluatees = corpus.evaluatee_ids();
    let both: Vec<String> = reviewer_ids.iter().filter(|r| evaluatees.contains(r)).cloned().collect();
    let pg = if both.len() >= 2 {
        let m = pg_matrix(records, &both, inputs.pg_orientation, inputs.alternative);
        if m.test.is_none() {
            notices.push("preference-gap t-test undefined (too few or constant gaps)".to_string());
        }
        Some(m)
    } else {
        notices.push("fewer than two reviewers are also evaluatees; no preference gaps".to_string());
        None
    };

    MetricsReport {
        setting,
        fingerprint: inputs.fingerprint,
        tie_policy: inputs.tie_policy,
        chair,
        reviewers,
        gold_alpha: if has_gold { gold_alpha(corpus, inputs.alpha_metric) } else { None },
        notices,
        pg,
    }
}

/// Flat `reviewer,other,pg` rows over every ordered pair, for plotting.
pub fn pg_csv(matrix: Option<&PgMatrix>) -> String {
    let mut out = String::from("reviewer,other,pg\n");
    if let Some(m) = matrix {
        for (i, a) in m.reviewer_ids.iter().enumerate() {
            for (j, b) in m.reviewer_ids.iter().enumerate() {
                let v = m.pg[i][j].map_or(String::new(), |v| format!("{v:.6}"));
                let _ = writeln!(out, "{a},{b},{v}");
            }
        }
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

/// Console table of A, tau and S, then the preference-gap summary.
pub fn console_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:>8} {:>8} {:>8}", "method", "A", "tau", "S");
    let mut row = |name: &str, m: &Metrics| {
        let _ = writeln!(
            out,
            "{:<24} {:>8} {:>8} {:>8}",
            name,
            fmt_opt(m.agreement),
            fmt_opt(m.kendall_tau),
            fmt_opt(m.spearman)
        );
    };
    if let Some(c) = &report.chair {
        row("chair", c);
    }
    for r in &report.reviewers {
        row(&r.reviewer_id, &r.metrics);
    }
    if let Some(pg) = &report.pg {
        match &pg.test {
            Some(t) => {
                let _ = writeln!(
                    out,
                    "PG over {} gaps: mean {:.4}, t {:.3}, p {:.4}, positive {:.2}",
                    t.n, t.mean, t.t_statistic, t.p_value, t.prop_positive
                );
            }
            None => {
                let _ = writeln!(out, "PG: no test");
            }
        }
    }
    for n in &report.notices {
        let _ = writeln!(out, "note: {n}");
    }
    out
}

/// Unparseable answers per reviewer.
pub fn unparseable_counts(records: &[ReviewRecord]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for r in records {
        let c = counts.entry(r.job.reviewer_id.clone()).or_insert(0);
        if !r.judgment.is_parseable() {
            *c += 1;
        }
    }
    counts
}
