//! The chair: weighted-vote aggregation of reviewer judgments into sample
//! scores, and the leaderboard built from them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exam::ReviewerProfile;
use crate::jobs::ReviewRecord;
use crate::types::{Choice, PromptSetting, Verdict};

/// Relative band inside which two vote totals count as tied, so that
/// rescaling every weight never flips a verdict through rounding.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub reviewer_id: String,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote: Option<Choice>,
}

/// Aggregated judgment of one sample: an output (pointwise) or an ordered pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateScore {
    pub task_id: String,
    pub subject_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub contributors: Vec<Contribution>,
    /// Set when no reviewer produced a usable vote on a pairwise sample.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReviewerStats {
    pub reviewer_id: String,
    pub mu: f64,
    pub sigma: f64,
    pub ratings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    pub setting: PromptSetting,
    pub scores: Vec<AggregateScore>,
    /// Pointwise samples no reviewer could rate.
    pub unjudged: Vec<(String, Vec<String>)>,
    /// Pointwise normalization statistics per reviewer.
    pub reviewer_stats: Vec<ReviewerStats>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Normalization {
    pub mu: f64,
    pub sigma: f64,
    pub normalized: Vec<f64>,
}

/// Mean-variance normalization of one reviewer's ratings, using the
/// population standard deviation. A constant rater normalizes to zeros.
pub fn normalize_reviewer(ratings: &[f64]) -> Result<Normalization> {
    if ratings.is_empty() {
        return Err(Error::Degenerate("reviewer has no parseable ratings".to_string()));
    }
    let n = ratings.len() as f64;
    let mu = ratings.iter().sum::<f64>() / n;
    let var = ratings.iter().map(|r| (r - mu) * (r - mu)).sum::<f64>() / n;
    let sigma = libm::sqrt(var);
    let normalized = if sigma > 0.0 {
        ratings.iter().map(|r| (r - mu) / sigma).collect()
    } else {
        alloc::vec![0.0; ratings.len()]
    };
    Ok(Normalization { mu, sigma, normalized })
}

type SampleKey = (String, Vec<String>);

fn passed_weights(profiles: &[ReviewerProfile]) -> BTreeMap<&str, f64> {
    profiles
        .iter()
        .filter(|p| p.passed)
        .map(|p| (p.reviewer_id.as_str(), p.weight))
        .collect()
}

fn check_setting(records: &[ReviewRecord], setting: PromptSetting) -> Result<()> {
    match records.iter().find(|r| r.job.setting != setting) {
        Some(r) => Err(Error::SettingMismatch {
            expected: setting.as_str(),
            found: r.job.setting.as_str(),
        }),
        None => Ok(()),
    }
}

/// Records sorted by job id so every reduction runs in a fixed order.
fn sorted(records: &[ReviewRecord]) -> Vec<&ReviewRecord> {
    let mut v: Vec<&ReviewRecord> = records.iter().collect();
    v.sort_by(|a, b| a.job.job_id.cmp(&b.job.job_id));
    v
}

/// Aggregates records of one setting.
pub fn aggregate(records: &[ReviewRecord], profiles: &[ReviewerProfile], setting: PromptSetting) -> Result<Aggregation> {
    if setting.is_pairwise() {
        check_setting(records, setting)?;
        Ok(Aggregation {
            setting,
            scores: aggregate_pairwise(records, profiles)?,
            unjudged: Vec::new(),
            reviewer_stats: Vec::new(),
        })
    } else {
        aggregate_pointwise(records, profiles, setting)
    }
}

/// Weighted mean of normalized ratings per output:
/// `R_x = sum_l w_l (r_l - mu_l) / sigma_l / W`, where `W` sums the weights of
/// the reviewers that produced a rating for `x`.
pub fn aggregate_pointwise(
    records: &[ReviewRecord],
    profiles: &[ReviewerProfile],
    setting: PromptSetting,
) -> Result<Aggregation> {
    check_setting(records, setting)?;
    let weights = passed_weights(profiles);
    let records = sorted(records);

    let mut per_reviewer: BTreeMap<&str, Vec<(&ReviewRecord, f64)>> = BTreeMap::new();
    let mut seen: BTreeMap<SampleKey, ()> = BTreeMap::new();
    for r in &records {
        if !weights.contains_key(r.job.reviewer_id.as_str()) {
            continue;
        }
        seen.insert((r.job.task_id.clone(), r.job.subject_ids.clone()), ());
        if let Some(rating) = r.judgment.rating {
            per_reviewer
                .entry(r.job.reviewer_id.as_str())
                .or_default()
                .push((r, f64::from(rating)));
        }
    }

    let mut samples: BTreeMap<SampleKey, Vec<Contribution>> = BTreeMap::new();
    let mut reviewer_stats = Vec::new();
    for (reviewer, rated) in &per_reviewer {
        let raw: Vec<f64> = rated.iter().map(|(_, v)| *v).collect();
        let norm = normalize_reviewer(&raw)?;
        reviewer_stats.push(ReviewerStats {
            reviewer_id: reviewer.to_string(),
            mu: norm.mu,
            sigma: norm.sigma,
            ratings: raw.len(),
        });
        for ((record, _), z) in rated.iter().zip(norm.normalized) {
            samples
                .entry((record.job.task_id.clone(), record.job.subject_ids.clone()))
                .or_default()
                .push(Contribution {
                    reviewer_id: reviewer.to_string(),
                    weight: weights[reviewer],
                    normalized: Some(z),
                    vote: None,
                });
        }
    }

    let mut scores = Vec::with_capacity(samples.len());
    for ((task_id, subject_ids), mut contributors) in samples {
        contributors.sort_by(|a, b| a.reviewer_id.cmp(&b.reviewer_id));
        let total: f64 = contributors.iter().map(|c| c.weight).sum();
        if total == 0.0 {
            return Err(Error::ZeroWeight(format!("{task_id}/{}", subject_ids.join(">"))));
        }
        let weighted: f64 = contributors
            .iter()
            .map(|c| c.weight * c.normalized.unwrap_or(0.0))
            .sum();
        scores.push(AggregateScore {
            task_id,
            subject_ids,
            score: Some(weighted / total),
            verdict: None,
            contributors,
            flagged: false,
        });
    }

    let unjudged = seen
        .into_keys()
        .filter(|k| {
            scores
                .binary_search_by(|s| (&s.task_id, &s.subject_ids).cmp(&(&k.0, &k.1)))
                .is_err()
        })
        .collect();

    Ok(Aggregation {
        setting,
        scores,
        unjudged,
        reviewer_stats,
    })
}

/// Weighted vote per ordered pair: the answer with the larger total weight
/// wins, equal totals are a tie. Samples without a parseable vote come out
/// as flagged ties.
pub fn aggregate_pairwise(records: &[ReviewRecord], profiles: &[ReviewerProfile]) -> Result<Vec<AggregateScore>> {
    check_setting(records, PromptSetting::Pairwise)?;
    let weights = passed_weights(profiles);
    let mut samples: BTreeMap<SampleKey, Vec<Contribution>> = BTreeMap::new();
    for r in sorted(records) {
        let Some(&weight) = weights.get(r.job.reviewer_id.as_str()) else {
            continue;
        };
        let slot = samples
            .entry((r.job.task_id.clone(), r.job.subject_ids.clone()))
            .or_default();
        if let Some(choice) = r.judgment.preference {
            slot.push(Contribution {
                reviewer_id: r.job.reviewer_id.clone(),
                weight,
                normalized: None,
                vote: Some(choice),
            });
        }
    }

    Ok(samples
        .into_iter()
        .map(|((task_id, subject_ids), mut contributors)| {
            contributors.sort_by(|a, b| a.reviewer_id.cmp(&b.reviewer_id));
            let flagged = contributors.is_empty();
            let verdict = weighted_vote(
                contributors
                    .iter()
                    .map(|c| (c.vote.expect("pairwise contributions carry votes"), c.weight)),
            );
            AggregateScore {
                task_id,
                subject_ids,
                score: None,
                verdict: Some(verdict),
                contributors,
                flagged,
            }
        })
        .collect())
}

/// Argmax over weighted votes; near-equal totals are a tie.
pub fn weighted_vote(votes: impl IntoIterator<Item = (Choice, f64)>) -> Verdict {
    let (mut one, mut two) = (0.0f64, 0.0f64);
    for (choice, weight) in votes {
        match choice {
            Choice::One => one += weight,
            Choice::Two => two += weight,
        }
    }
    let scale = one.abs().max(two.abs());
    if (one - two).abs() <= TIE_TOLERANCE * scale {
        Verdict::Tie
    } else if one > two {
        Verdict::First
    } else {
        Verdict::Second
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub evaluatee_id: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub setting: PromptSetting,
    pub entries: Vec<LeaderboardEntry>,
}

/// Per-evaluatee score: mean aggregate score (pointwise) or win share over
/// every ordered sample it appears in (pairwise; a tie is half a win).
/// Sorted descending; exactly equal scores share a rank.
pub fn leaderboard(scores: &[AggregateScore], setting: PromptSetting) -> Leaderboard {
    let mut totals: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for s in scores {
        if setting.is_pairwise() {
            let (Some(verdict), [a, b]) = (s.verdict, s.subject_ids.as_slice()) else {
                continue;
            };
            let (wa, wb) = match verdict {
                Verdict::First => (1.0, 0.0),
                Verdict::Second => (0.0, 1.0),
                Verdict::Tie => (0.5, 0.5),
            };
            for (id, w) in [(a, wa), (b, wb)] {
                let e = totals.entry(id.as_str()).or_default();
                e.0 += w;
                e.1 += 1;
            }
        } else if let (Some(score), Some(id)) = (s.score, s.subject_ids.first()) {
            let e = totals.entry(id.as_str()).or_default();
            e.0 += score;
            e.1 += 1;
        }
    }
    let mut entries: Vec<LeaderboardEntry> = totals
        .into_iter()
        .map(|(id, (sum, n))| LeaderboardEntry {
            evaluatee_id: id.to_string(),
            score: sum / n as f64,
            rank: 0,
        })
        .collect();
    entries.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.evaluatee_id.cmp(&b.evaluatee_id))
    });
    for i in 0..entries.len() {
        entries[i].rank = if i > 0 && entries[i].score == entries[i - 1].score {
            entries[i - 1].rank
        } else {
            i + 1
        };
    }
    Leaderboard { setting, entries }
}
