//! Run configuration: one JSON document per run.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use peer_eval_core::bias::{Alternative, PgOrientation};
use peer_eval_core::corpus::AlphaMetric;
use peer_eval_core::exam::{WeightScheme, DEFAULT_CLAMP_EPS, DEFAULT_ETA, DEFAULT_XI};
use peer_eval_core::hash::hash_str;
use peer_eval_core::{PromptSetting, TiePolicy};
use serde::{Deserialize, Serialize};

use crate::backend::BackendSpec;
use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoExamPolicy {
    /// Gold exam only.
    #[default]
    Off,
    /// Pass requires both the gold exam and order consistency of at least eta.
    WithExam,
    /// Order consistency alone decides; weights are uniform.
    Only,
}

fn default_xi() -> f64 {
    DEFAULT_XI
}
fn default_eta() -> f64 {
    DEFAULT_ETA
}
fn default_clamp_eps() -> f64 {
    DEFAULT_CLAMP_EPS
}
fn default_auto_exam_tasks() -> usize {
    20
}
fn default_workers() -> usize {
    8
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_seed() -> u64 {
    42
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub tasks: PathBuf,
    /// Evaluatee outputs. When absent they are generated into the output
    /// directory by the evaluatees' backends.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<PathBuf>,
    #[serde(default)]
    pub backends: Vec<BackendSpec>,
    /// Empty means every evaluatee found in the outputs.
    #[serde(default)]
    pub evaluatees: Vec<String>,
    /// Reviewer candidates.
    pub reviewers: Vec<String>,
    /// Evaluatees whose gold-labelled outputs make up the exam.
    #[serde(default)]
    pub questioners: Vec<String>,
    pub setting: PromptSetting,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default)]
    pub weight_scheme: WeightScheme,
    #[serde(default = "default_clamp_eps")]
    pub clamp_eps: f64,
    #[serde(default)]
    pub tie_policy: TiePolicy,
    #[serde(default)]
    pub auto_exam: AutoExamPolicy,
    /// Exam size in tasks; all gold tasks when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exam_tasks: Option<usize>,
    #[serde(default = "default_auto_exam_tasks")]
    pub auto_exam_tasks: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub pg_orientation: PgOrientation,
    #[serde(default)]
    pub t_test: Alternative,
    #[serde(default = "default_alpha_metric")]
    pub alpha_metric: AlphaMetric,
}

fn default_alpha_metric() -> AlphaMetric {
    AlphaMetric::Interval
}

impl RunConfig {
    /// A config with defaults for every optional knob.
    pub fn new(tasks: impl Into<PathBuf>, reviewers: Vec<String>, setting: PromptSetting) -> Self {
        Self {
            tasks: tasks.into(),
            outputs: None,
            gold: None,
            backends: Vec::new(),
            evaluatees: Vec::new(),
            reviewers,
            questioners: Vec::new(),
            setting,
            xi: DEFAULT_XI,
            eta: DEFAULT_ETA,
            weight_scheme: WeightScheme::default(),
            clamp_eps: DEFAULT_CLAMP_EPS,
            tie_policy: TiePolicy::default(),
            auto_exam: AutoExamPolicy::default(),
            exam_tasks: None,
            auto_exam_tasks: default_auto_exam_tasks(),
            workers: default_workers(),
            cache_dir: None,
            out_dir: default_out_dir(),
            seed: default_seed(),
            pg_orientation: PgOrientation::default(),
            t_test: Alternative::default(),
            alpha_metric: default_alpha_metric(),
        }
    }

    /// Loads and validates a config; relative paths resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: Self =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.tasks);
        fix(&mut self.out_dir);
        for p in [&mut self.outputs, &mut self.gold, &mut self.cache_dir].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        for (name, v) in [("xi", self.xi), ("eta", self.eta)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if self.clamp_eps.is_nan() || self.clamp_eps <= 0.0 || self.clamp_eps >= 0.5 {
            return bad(format!("clamp_eps must lie in (0, 0.5), got {}", self.clamp_eps));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.reviewers.is_empty() {
            return bad("no reviewer candidates".into());
        }
        let mut ids = BTreeSet::new();
        for spec in &self.backends {
            spec.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
            if !ids.insert(spec.backend_id.as_str()) {
                return bad(format!("duplicate backend `{}`", spec.backend_id));
            }
        }
        for r in &self.reviewers {
            if !ids.contains(r.as_str()) {
                return bad(format!("reviewer `{r}` has no backend spec"));
            }
        }
        // Evaluatees only need a backend when their outputs must be generated.
        if self.outputs.is_none() {
            if self.evaluatees.is_empty() {
                return bad("without an outputs file the evaluatees must be listed".into());
            }
            for e in &self.evaluatees {
                if !ids.contains(e.as_str()) {
                    return bad(format!("evaluatee `{e}` has no backend spec to generate outputs"));
                }
            }
        }
        if self.auto_exam != AutoExamPolicy::Only {
            if self.questioners.is_empty() {
                return bad("the qualification exam needs questioners".into());
            }
            if self.gold.is_none() {
                return bad("the qualification exam needs a gold file".into());
            }
        }
        if !self.evaluatees.is_empty() {
            for q in &self.questioners {
                if !self.evaluatees.contains(q) {
                    return bad(format!("questioner `{q}` is not an evaluatee"));
                }
            }
        }
        Ok(())
    }

    /// Hash of every knob, as 16 hex digits. Where artifacts and the cache
    /// live, and how many workers run, do not change results and are left out.
    pub fn fingerprint(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("out_dir");
            map.remove("cache_dir");
            map.remove("workers");
        }
        // serde_json maps are ordered, so the canonical text is stable.
        format!("{:016x}", hash_str(&value.to_string()))
    }

    pub fn stage_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}
