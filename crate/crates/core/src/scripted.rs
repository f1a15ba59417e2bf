//! Scripted reviewer with a known accuracy, used as a deterministic stand-in
//! for a real model in tests and desk-scale experiments.

use alloc::format;
use alloc::string::{String, ToString};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hash::hash_parts;
use crate::judgment::ParsedJudgment;
use crate::types::{Choice, PromptSetting, Verdict};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedConfig {
    /// Probability of answering in line with the gold verdict.
    pub accuracy: f64,
    #[serde(default)]
    pub seed: u64,
    /// Evaluatee this reviewer favors when it appears in a job.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_id: Option<String>,
    #[serde(default)]
    pub bias_strength: f64,
}

impl ScriptedConfig {
    pub fn new(accuracy: f64, seed: u64) -> Self {
        Self {
            accuracy,
            seed,
            self_id: None,
            bias_strength: 0.0,
        }
    }

    pub fn with_bias(mut self, self_id: impl Into<String>, strength: f64) -> Self {
        self.self_id = Some(self_id.into());
        self.bias_strength = strength;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(Error::InvalidInput(format!(
                "scripted accuracy {} is outside [0, 1]",
                self.accuracy
            )));
        }
        if !(0.0..=1.0).contains(&self.bias_strength) {
            return Err(Error::InvalidInput(format!(
                "bias_strength {} is outside [0, 1]",
                self.bias_strength
            )));
        }
        Ok(())
    }
}

/// What the scripted reviewer treats as the truth for a job.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoldHint {
    /// Verdict for the job's subjects in the order they are listed.
    Preference(Verdict),
    /// Likert level 1 to 5 of the single subject.
    Level(u8),
}

/// One judging request as the scripted reviewer sees it.
#[derive(Clone, Copy, Debug)]
pub struct ScriptedJob<'a> {
    pub task_id: &'a str,
    pub setting: PromptSetting,
    pub subject_ids: &'a [String],
    /// Falls back to a latent, order-independent truth when absent.
    pub gold: Option<GoldHint>,
}

/// Deterministic random stream for one prompt of one scripted reviewer.
pub fn prompt_rng(seed: u64, prompt: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(hash_parts(&[&seed.to_le_bytes(), prompt.as_bytes()]))
}

fn latent_strength(task_id: &str, subject: &str) -> u64 {
    hash_parts(&[b"latent", task_id.as_bytes(), subject.as_bytes()])
}

/// Truth used when no gold is known: a fixed pseudo-random quality per
/// (task, subject), so both orders of a pair agree.
pub fn latent_gold(task_id: &str, setting: PromptSetting, subject_ids: &[String]) -> GoldHint {
    if setting.is_pairwise() {
        let a = latent_strength(task_id, &subject_ids[0]);
        let b = latent_strength(task_id, &subject_ids[1]);
        GoldHint::Preference(if a >= b { Verdict::First } else { Verdict::Second })
    } else {
        GoldHint::Level(1 + (latent_strength(task_id, &subject_ids[0]) % 5) as u8)
    }
}

/// Answers one job.
///
/// The gold-agreeing answer comes out with probability `accuracy`, otherwise
/// the opposite one (pairwise) or a uniformly drawn other level (pointwise).
/// When the reviewer's own evaluatee is among the subjects, a further draw
/// with probability `bias_strength` pushes the answer toward it.
pub fn scripted_judge<R: Rng + ?Sized>(
    config: &ScriptedConfig,
    job: &ScriptedJob<'_>,
    rng: &mut R,
) -> ParsedJudgment {
    let accuracy = config.accuracy.clamp(0.0, 1.0);
    let bias = config.bias_strength.clamp(0.0, 1.0);
    let gold = job
        .gold
        .unwrap_or_else(|| latent_gold(job.task_id, job.setting, job.subject_ids));
    let own_slot = config
        .self_id
        .as_deref()
        .and_then(|me| job.subject_ids.iter().position(|s| s == me));

    match job.setting {
        PromptSetting::Pairwise => {
            let truth = match gold {
                GoldHint::Preference(Verdict::First) => Choice::One,
                GoldHint::Preference(Verdict::Second) => Choice::Two,
                GoldHint::Preference(Verdict::Tie) => {
                    if rng.random_bool(0.5) {
                        Choice::One
                    } else {
                        Choice::Two
                    }
                }
                GoldHint::Level(_) => Choice::One,
            };
            let mut choice = if rng.random_bool(accuracy) { truth } else { truth.other() };
            if let Some(slot) = own_slot {
                let favored = if slot == 0 { Choice::One } else { Choice::Two };
                if choice != favored && rng.random_bool(bias) {
                    choice = favored;
                }
            }
            ParsedJudgment::preference(choice, choice.as_str())
        }
        PromptSetting::Point5 | PromptSetting::Point100 => {
            let truth = match gold {
                GoldHint::Level(level) => level.clamp(1, 5),
                GoldHint::Preference(_) => 3,
            };
            let mut level = if rng.random_bool(accuracy) {
                truth
            } else {
                // Uniform over the four other levels.
                let draw = rng.random_range(1..=4u8);
                if draw >= truth {
                    draw + 1
                } else {
                    draw
                }
            };
            if own_slot.is_some() && level < 5 && rng.random_bool(bias) {
                level += 1;
            }
            let rating = if job.setting == PromptSetting::Point5 {
                level
            } else {
                let centre = i16::from(level) * 20 - 10;
                (centre + rng.random_range(-5..=5i16)) as u8
            };
            ParsedJudgment::rating(rating, rating.to_string())
        }
    }
}
