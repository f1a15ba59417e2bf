//! Small shared vocabulary types.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The three ways a reviewer can be asked to judge outputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptSetting {
    /// Choose the better of two outputs.
    Pairwise,
    /// Rate one output on a 1-5 scale.
    Point5,
    /// Rate one output on a 0-100 scale.
    Point100,
}

impl PromptSetting {
    pub const ALL: [PromptSetting; 3] = [Self::Pairwise, Self::Point5, Self::Point100];

    pub fn is_pairwise(self) -> bool {
        matches!(self, Self::Pairwise)
    }

    /// Number of outputs shown in one prompt.
    pub fn arity(self) -> usize {
        if self.is_pairwise() {
            2
        } else {
            1
        }
    }

    /// Inclusive rating range for pointwise settings.
    pub fn rating_range(self) -> Option<(u8, u8)> {
        match self {
            Self::Pairwise => None,
            Self::Point5 => Some((1, 5)),
            Self::Point100 => Some((0, 100)),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pairwise => "pairwise",
            Self::Point5 => "point5",
            Self::Point100 => "point100",
        }
    }
}

impl fmt::Display for PromptSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pairwise" => Ok(Self::Pairwise),
            "point5" => Ok(Self::Point5),
            "point100" => Ok(Self::Point100),
            other => Err(Error::InvalidInput(alloc::format!(
                "unknown setting `{other}` (expected pairwise, point5 or point100)"
            ))),
        }
    }
}

/// Outcome of comparing the first-listed output against the second-listed one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    First,
    Second,
    Tie,
}

impl Verdict {
    /// The same judgment seen with the pair listed in the opposite order.
    pub fn flip(self) -> Self {
        match self {
            Self::First => Self::Second,
            Self::Second => Self::First,
            Self::Tie => Self::Tie,
        }
    }

    /// Verdict implied by two scores, higher is better.
    pub fn from_scores(first: f64, second: f64) -> Self {
        if first > second {
            Self::First
        } else if first < second {
            Self::Second
        } else {
            Self::Tie
        }
    }
}

/// A reviewer's answer in the pairwise setting: summary `one` or summary `two`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    One,
    Two,
}

impl Choice {
    pub fn verdict(self) -> Verdict {
        match self {
            Self::One => Verdict::First,
            Self::Two => Verdict::Second,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Self::One => Self::Two,
            Self::Two => Self::One,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::One => "one",
            Self::Two => "two",
        }
    }
}

/// How ties are scored when comparing preferences against gold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Gold ties are skipped; a model tie on a decided pair earns half credit.
    #[default]
    Half,
    /// Gold ties are skipped; a model tie on a decided pair earns nothing.
    Zero,
    /// Gold ties count; credit only for an identical verdict.
    Exact,
}

impl TiePolicy {
    /// Credit for a model verdict against a gold verdict, or `None` when the
    /// pair does not count under this policy.
    pub fn credit(self, model: Verdict, gold: Verdict) -> Option<f64> {
        match self {
            Self::Half | Self::Zero if gold == Verdict::Tie => None,
            Self::Half if model == Verdict::Tie => Some(0.5),
            Self::Exact | Self::Half | Self::Zero => Some(if model == gold { 1.0 } else { 0.0 }),
        }
    }

    /// Whether a gold verdict enters the denominator.
    pub fn counts_gold(self, gold: Verdict) -> bool {
        matches!(self, Self::Exact) || gold != Verdict::Tie
    }
}
