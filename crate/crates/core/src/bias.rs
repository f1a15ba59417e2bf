//! Self-preference diagnostics.
//!
//! `PG(i, j) = P_i(i > j) - P_j(i > j)`: how often reviewer `i` prefers its
//! own outputs over `j`'s, minus how often `j` prefers `i`'s outputs over its
//! own. Without ties `P_x(j > i) = 1 - P_x(i > j)`, which makes the measure
//! symmetric, `PG(i, j) = PG(j, i)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jobs::ReviewRecord;
use crate::special::{student_t_two_sided, student_t_upper};
use crate::types::Choice;

/// Per task: `(strict wins of owner, decided comparisons)` as seen by one reviewer.
pub type Tally = BTreeMap<String, (u32, u32)>;

/// How reviewer `judge` decided between outputs of `owner` and `other`.
///
/// Pairwise records count once per ordered judgment. Pointwise ratings are
/// turned into a preference per task by strict comparison; equal ratings
/// drop the task.
pub fn tally(records: &[ReviewRecord], judge: &str, owner: &str, other: &str) -> Tally {
    let mut out: Tally = BTreeMap::new();
    let mut ratings: BTreeMap<&str, (Option<u8>, Option<u8>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.job.reviewer_id == judge) {
        match r.job.subject_ids.as_slice() {
            [a, b] if (a == owner && b == other) || (a == other && b == owner) => {
                if let Some(choice) = r.judgment.preference {
                    let owner_won = (a == owner) == (choice == Choice::One);
                    let e = out.entry(r.job.task_id.clone()).or_default();
                    e.0 += u32::from(owner_won);
                    e.1 += 1;
                }
            }
            [a] if a == owner || a == other => {
                if let Some(rating) = r.judgment.rating {
                    let e = ratings.entry(r.job.task_id.as_str()).or_default();
                    if a == owner {
                        e.0 = Some(rating);
                    } else {
                        e.1 = Some(rating);
                    }
                }
            }
            _ => {}
        }
    }
    for (task, pair) in ratings {
        if let (Some(mine), Some(theirs)) = pair {
            if mine != theirs {
                out.insert(task.to_string(), (u32::from(mine > theirs), 1));
            }
        }
    }
    out
}

fn proportion(t: &Tally, shared: &[&String]) -> f64 {
    let (wins, total) = shared
        .iter()
        .map(|k| t[*k])
        .fold((0u64, 0u64), |acc, (w, n)| (acc.0 + u64::from(w), acc.1 + u64::from(n)));
    wins as f64 / total as f64
}

/// `PG(i, j)` over the tasks both reviewers decided.
pub fn preference_gap(records: &[ReviewRecord], i: &str, j: &str) -> Result<f64> {
    let by_i = tally(records, i, i, j);
    let by_j = tally(records, j, i, j);
    let shared: Vec<&String> = by_i
        .iter()
        .filter(|(k, v)| v.1 > 0 && by_j.get(*k).is_some_and(|w| w.1 > 0))
        .map(|(k, _)| k)
        .collect();
    if shared.is_empty() {
        return Err(Error::Degenerate(format!(
            "reviewers `{i}` and `{j}` share no judged task on each other's outputs"
        )));
    }
    Ok(proportion(&by_i, &shared) - proportion(&by_j, &shared))
}

/// Which off-diagonal entries feed the summary statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PgOrientation {
    /// `pg[i][j]` for `i < j` in the configured reviewer order.
    #[default]
    CanonicalIndex,
    /// Every `pg[i][j]` with `i != j`.
    AllOrdered,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// Mean greater than zero.
    Greater,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub n: usize,
    pub mean: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub prop_positive: f64,
}

/// One-sample t-test of preference gaps against zero. Equivalent to the
/// paired test of the two proportion vectors the gaps are built from.
pub fn pg_significance(values: &[f64], alternative: Alternative) -> Result<TTest> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "t-test needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if values.iter().all(|v| *v == values[0]) || var == 0.0 {
        return Err(Error::Degenerate("preference gaps have zero variance".to_string()));
    }
    let t = mean / libm::sqrt(var / n);
    let df = n - 1.0;
    let p_value = match alternative {
        Alternative::TwoSided => student_t_two_sided(t, df),
        Alternative::Greater => student_t_upper(t, df),
    };
    Ok(TTest {
        n: values.len(),
        mean,
        t_statistic: t,
        p_value,
        prop_positive: values.iter().filter(|v| **v > 0.0).count() as f64 / n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgMatrix {
    pub reviewer_ids: Vec<String>,
    /// `pg[i][j] = PG(reviewer_ids[i], reviewer_ids[j])`; `None` without shared tasks.
    pub pg: Vec<Vec<Option<f64>>>,
    pub orientation: PgOrientation,
    pub test: Option<TTest>,
}

impl PgMatrix {
    /// Gaps selected by an orientation, skipping missing entries.
    pub fn values(&self, orientation: PgOrientation) -> Vec<f64> {
        let k = self.reviewer_ids.len();
        let mut out = Vec::new();
        for i in 0..k {
            for j in 0..k {
                let take = match orientation {
                    PgOrientation::CanonicalIndex => i < j,
                    PgOrientation::AllOrdered => i != j,
                };
                if take {
                    out.extend(self.pg[i][j]);
                }
            }
        }
        out
    }

    /// Mean of the row of one reviewer, off the diagonal.
    pub fn row_values(&self, reviewer_id: &str) -> Vec<f64> {
        let Some(i) = self.reviewer_ids.iter().position(|r| r == reviewer_id) else {
            return Vec::new();
        };
        self.pg[i]
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .filter_map(|(_, v)| *v)
            .collect()
    }
}

/// PG for every ordered pair of reviewers, plus a t-test over the gaps the
/// orientation selects (absent when the test is undefined).
pub fn pg_matrix(
    records: &[ReviewRecord],
    reviewer_ids: &[String],
    orientation: PgOrientation,
    alternative: Alternative,
) -> PgMatrix {
    let k = reviewer_ids.len();
    let mut pg = alloc::vec![alloc::vec![None; k]; k];
    for i in 0..k {
        pg[i][i] = Some(0.0);
        for j in 0..k {
            if i != j {
                pg[i][j] = preference_gap(records, &reviewer_ids[i], &reviewer_ids[j]).ok();
            }
        }
    }
    let mut matrix = PgMatrix {
        reviewer_ids: reviewer_ids.to_vec(),
        pg,
        orientation,
        test: None,
    };
    matrix.test = pg_significance(&matrix.values(orientation), alternative).ok();
    matrix
}
