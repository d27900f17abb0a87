//! Pattern-based misuse detectors behind one interface.

pub mod call_pairs;
pub mod call_set;
pub mod callgraph;
pub mod temporal;
pub mod type_usage;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mining::{Deadline, MiningError, Transaction};
use crate::model::{Finding, MethodUsageModel, SignatureMode};
use crate::par::Execution;

pub use temporal::conviction;
pub use type_usage::strangeness;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DetectError {
    #[error("unknown detector `{0}` (valid: call-set, call-pair, type-usage, temporal)")]
    UnknownDetector(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cancelled at deadline")]
    Cancelled,
    #[error("{0}")]
    Internal(String),
}

impl From<MiningError> for DetectError {
    fn from(e: MiningError) -> Self {
        match e {
            MiningError::Cancelled => DetectError::Cancelled,
            other => DetectError::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    CallSet,
    CallPair,
    TypeUsage,
    Temporal,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 4] = [
        DetectorKind::CallSet,
        DetectorKind::CallPair,
        DetectorKind::TypeUsage,
        DetectorKind::Temporal,
    ];

    pub fn id(self) -> &'static str {
        match self {
            DetectorKind::CallSet => "call-set",
            DetectorKind::CallPair => "call-pair",
            DetectorKind::TypeUsage => "type-usage",
            DetectorKind::Temporal => "temporal",
        }
    }

    /// Row of the surveyed capability matrix this detector reimplements.
    pub fn capability_row(self) -> &'static str {
        match self {
            DetectorKind::CallSet => "pr-miner",
            DetectorKind::CallPair => "jadet",
            DetectorKind::TypeUsage => "dmmc",
            DetectorKind::Temporal => "tikanga",
        }
    }

    pub fn default_min_support(self) -> usize {
        match self {
            DetectorKind::CallSet => 15,
            DetectorKind::CallPair | DetectorKind::Temporal => 20,
            DetectorKind::TypeUsage => 2,
        }
    }

    pub fn mines_patterns(self) -> bool {
        self != DetectorKind::TypeUsage
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for DetectorKind {
    type Err = DetectError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| DetectError::UnknownDetector(s.to_owned()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub min_support: usize,
    pub rarity_factor: f64,
    pub max_missing_facts: usize,
    pub strangeness_threshold: f64,
    pub signature_mode: SignatureMode,
    pub interprocedural_depth: usize,
    pub subtype_aware: bool,
    /// Type name to direct supertypes, from extraction.
    #[serde(skip)]
    pub supertypes: BTreeMap<String, BTreeSet<String>>,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            min_support: 20,
            rarity_factor: 10.0,
            max_missing_facts: 2,
            strangeness_threshold: 0.97,
            signature_mode: SignatureMode::Full,
            interprocedural_depth: 0,
            subtype_aware: false,
            supertypes: BTreeMap::new(),
            execution: Execution::default(),
        }
    }
}

impl DetectorConfig {
    pub fn for_kind(kind: DetectorKind) -> Self {
        Self {
            min_support: kind.default_min_support(),
            ..Self::default()
        }
    }

    pub fn with_min_support(mut self, n: usize) -> Self {
        self.min_support = n;
        self
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.rarity_factor > 0.0 && self.rarity_factor.is_finite()) {
            return Err(DetectError::InvalidConfig("rarity_factor must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.strangeness_threshold) {
            return Err(DetectError::InvalidConfig(
                "strangeness_threshold must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    fn require_min_support(&self, at_least: usize) -> Result<(), DetectError> {
        if self.min_support < at_least {
            return Err(DetectError::InvalidConfig(format!(
                "min_support must be at least {at_least}, got {}",
                self.min_support
            )));
        }
        Ok(())
    }
}

/// Findings of one detector, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFindings {
    pub detector_id: String,
    pub findings: Vec<Finding>,
}

pub trait Detector: Sync {
    fn id(&self) -> &str;

    fn detect(
        &self,
        models: &[MethodUsageModel],
        config: &DetectorConfig,
        deadline: Deadline,
    ) -> Result<Vec<Finding>, DetectError>;
}

pub struct BuiltIn(pub DetectorKind);

impl Detector for BuiltIn {
    fn id(&self) -> &str {
        self.0.id()
    }

    fn detect(
        &self,
        models: &[MethodUsageModel],
        config: &DetectorConfig,
        deadline: Deadline,
    ) -> Result<Vec<Finding>, DetectError> {
        config.validate()?;
        match self.0 {
            DetectorKind::CallSet => call_set::detect(models, config, deadline),
            DetectorKind::CallPair => call_pairs::detect(models, config, deadline),
            DetectorKind::TypeUsage => type_usage::detect(models, config, deadline),
            DetectorKind::Temporal => temporal::detect(models, config, deadline),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed { findings: RankedFindings },
    Timeout { elapsed: Duration },
    Error { message: String },
}

impl RunStatus {
    pub fn findings(&self) -> Option<&RankedFindings> {
        match self {
            RunStatus::Completed { findings } => Some(findings),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Completed { .. } => "completed",
            RunStatus::Timeout { .. } => "timeout",
            RunStatus::Error { .. } => "error",
        }
    }
}

/// Runs a built-in detector by id with a wall-clock timeout.
pub fn run_detector(
    detector_id: &str,
    models: &[MethodUsageModel],
    config: &DetectorConfig,
    timeout: Duration,
) -> Result<RunStatus, DetectError> {
    let kind: DetectorKind = detector_id.parse()?;
    Ok(run_with(&BuiltIn(kind), models, config, timeout))
}

/// Runs any detector, turning timeouts, errors and panics into a status.
pub fn run_with(
    detector: &dyn Detector,
    models: &[MethodUsageModel],
    config: &DetectorConfig,
    timeout: Duration,
) -> RunStatus {
    if timeout.is_zero() {
        return RunStatus::Timeout {
            elapsed: Duration::ZERO,
        };
    }
    let start = Instant::now();
    let deadline = Deadline::after(timeout);
    let result = catch_unwind(AssertUnwindSafe(|| detector.detect(models, config, deadline)));
    let elapsed = start.elapsed();
    match result {
        Ok(Ok(_)) | Ok(Err(DetectError::Cancelled)) if elapsed >= timeout => RunStatus::Timeout { elapsed },
        Ok(Ok(mut findings)) => {
            sort_findings(&mut findings);
            RunStatus::Completed {
                findings: RankedFindings {
                    detector_id: detector.id().to_owned(),
                    findings,
                },
            }
        }
        Ok(Err(DetectError::Cancelled)) => RunStatus::Timeout { elapsed },
        Ok(Err(e)) => RunStatus::Error {
            message: e.to_string(),
        },
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "detector panicked".to_owned());
            RunStatus::Error { message }
        }
    }
}

/// Score descending (infinite first), then pattern support descending,
/// then location, then the fact sets and metadata.
pub fn sort_findings(findings: &mut [Finding]) {
    findings.sort_by(|a, b| {
        b.score
            .cmp_total(a.score)
            .then_with(|| b.pattern_support.cmp(&a.pattern_support))
            .then_with(|| a.location.sort_key().cmp(&b.location.sort_key()))
            .then_with(|| a.location.cmp(&b.location))
            .then_with(|| a.missing_facts.cmp(&b.missing_facts))
            .then_with(|| a.present_facts.cmp(&b.present_facts))
            .then_with(|| a.metadata.cmp(&b.metadata))
    });
}

/// Keeps the best-ranked finding per key.
pub(crate) fn dedupe_by<K: Ord>(findings: Vec<Finding>, key: impl Fn(&Finding) -> K) -> Vec<Finding> {
    let mut sorted = findings;
    sort_findings(&mut sorted);
    let mut seen = BTreeSet::new();
    sorted.into_iter().filter(|f| seen.insert(key(f))).collect()
}

/// Transactions a pattern-mining detector mines from, exposed so callers
/// can inspect what patterns are built from.
pub fn transactions_for(
    kind: DetectorKind,
    models: &[MethodUsageModel],
    config: &DetectorConfig,
) -> Vec<Transaction> {
    match kind {
        DetectorKind::CallSet => call_set::transactions(models, config),
        DetectorKind::CallPair => call_pairs::usages(models, config)
            .into_iter()
            .map(|u| u.transaction)
            .collect(),
        DetectorKind::TypeUsage => type_usage::transactions(models, config),
        DetectorKind::Temporal => temporal::usages(models, config)
            .into_iter()
            .map(|u| u.transaction)
            .collect(),
    }
}

/// Transaction id of the model at `index`; sorts in corpus order.
pub(crate) fn model_tid(index: usize) -> String {
    format!("{index:06}")
}

pub(crate) fn object_tid(index: usize, object: &str) -> String {
    format!("{index:06}:{object}")
}

/// Index of the model a transaction id refers to.
pub fn tid_model_index(tid: &str) -> Option<usize> {
    tid.split(':').next()?.parse().ok()
}

#[cfg(test)]
pub(crate) mod testing {
    use crate::model::{MethodSignature, MethodUsageModel, SourceLocation, TrackedObject, UsageEvent};

    pub fn loc(file: &str, method: &str) -> SourceLocation {
        SourceLocation::new("p", "v", file, method, Some(1)).unwrap()
    }

    /// A model with one object `o` of type `ty` calling `calls` in order.
    pub fn usage(file: &str, method: &str, ty: &str, calls: &[&str]) -> MethodUsageModel {
        let mut m = MethodUsageModel::empty(loc(file, method));
        m.objects.push(TrackedObject {
            name: "o".into(),
            static_type: Some(ty.into()),
        });
        m.events = calls
            .iter()
            .map(|c| UsageEvent::Call {
                object: "o".into(),
                method: MethodSignature::of(Some(ty), c, 0),
            })
            .collect();
        m
    }

    pub fn copies(n: usize, ty: &str, calls: &[&str]) -> Vec<MethodUsageModel> {
        (0..n)
            .map(|i| usage(&format!("c/C{i:03}.java"), "m", ty, calls))
            .collect()
    }
}
