//! Run configuration: an optional YAML file overlaid by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bench::experiment::Settings;
use crate::detect::{DetectError, DetectorConfig, DetectorKind};
use crate::model::SignatureMode;
use crate::par::Execution;

pub const DEFAULT_TIMEOUT_SECS: f64 = 7200.0;
pub const DEFAULT_TOP_N: usize = 20;
pub const DEFAULT_COPIES: usize = 50;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Syntax { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Detector(#[from] DetectError),
}

/// Per-detector settings; unset fields keep the detector default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorOverride {
    pub min_support: Option<usize>,
    pub rarity_factor: Option<f64>,
    pub max_missing_facts: Option<usize>,
    pub strangeness_threshold: Option<f64>,
    pub signature_mode: Option<SignatureMode>,
    pub interprocedural_depth: Option<usize>,
    pub subtype_aware: Option<bool>,
}

/// Partial configuration, as read from a file or collected from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartialConfig {
    pub dataset: Option<PathBuf>,
    pub workspace: Option<PathBuf>,
    pub detectors: Option<Vec<String>>,
    pub min_support: Option<usize>,
    /// Seconds; fractions allowed.
    pub timeout: Option<f64>,
    pub seed: Option<u64>,
    pub top_n: Option<usize>,
    pub jobs: Option<usize>,
    pub copies: Option<usize>,
    pub overrides: BTreeMap<String, DetectorOverride>,
}

impl PartialConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        serde_yaml::from_str(&text).map_err(|e| ConfigError::Syntax {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    /// Fields set in `top` win.
    pub fn overlay(mut self, top: PartialConfig) -> PartialConfig {
        macro_rules! take {
            ($($f:ident),*) => {$( if top.$f.is_some() { self.$f = top.$f; } )*};
        }
        take!(dataset, workspace, detectors, min_support, timeout, seed, top_n, jobs, copies);
        for (k, v) in top.overrides {
            self.overrides.insert(k, v);
        }
        self
    }

    pub fn resolve(self) -> Result<RunConfig, ConfigError> {
        let timeout = self.timeout.unwrap_or(DEFAULT_TIMEOUT_SECS);
        if !(timeout > 0.0 && timeout.is_finite()) {
            return Err(ConfigError::Invalid(format!("timeout must be positive, got {timeout}")));
        }
        let detectors = parse_detectors(self.detectors.as_deref().unwrap_or(&["all".to_owned()]))?;
        for k in self.overrides.keys() {
            k.parse::<DetectorKind>()?;
        }
        let top_n = self.top_n.unwrap_or(DEFAULT_TOP_N);
        if top_n == 0 {
            return Err(ConfigError::Invalid("top_n must be positive".into()));
        }
        if self.jobs == Some(0) {
            return Err(ConfigError::Invalid("jobs must be positive".into()));
        }
        let copies = self.copies.unwrap_or(DEFAULT_COPIES);
        if copies < 2 {
            return Err(ConfigError::Invalid("copies must be at least 2".into()));
        }
        let cfg = RunConfig {
            dataset: self.dataset.ok_or_else(|| ConfigError::Invalid("no dataset given".into()))?,
            workspace: self.workspace.unwrap_or_else(|| PathBuf::from("workspace")),
            detectors,
            overrides: self.overrides,
            min_support: self.min_support,
            timeout: Duration::from_secs_f64(timeout),
            seed: self.seed.unwrap_or(0),
            top_n,
            jobs: self.jobs,
            copies,
        };
        for k in &cfg.detectors {
            cfg.detector_config(*k).validate()?;
        }
        Ok(cfg)
    }
}

/// Accepts detector ids and `all`; duplicates are dropped.
pub fn parse_detectors(names: &[String]) -> Result<Vec<DetectorKind>, ConfigError> {
    let mut out = Vec::new();
    for n in names {
        for part in n.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let kinds: Vec<DetectorKind> = if part == "all" {
                DetectorKind::ALL.to_vec()
            } else {
                vec![part.parse()?]
            };
            for k in kinds {
                if !out.contains(&k) {
                    out.push(k);
                }
            }
        }
    }
    if out.is_empty() {
        return Err(ConfigError::Invalid("no detector selected".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    pub workspace: PathBuf,
    pub detectors: Vec<DetectorKind>,
    pub overrides: BTreeMap<String, DetectorOverride>,
    /// Applies to every detector unless overridden per detector.
    pub min_support: Option<usize>,
    pub timeout: Duration,
    pub seed: u64,
    pub top_n: usize,
    pub jobs: Option<usize>,
    pub copies: usize,
}

impl RunConfig {
    pub fn detector_config(&self, kind: DetectorKind) -> DetectorConfig {
        let mut c = DetectorConfig::for_kind(kind);
        if let Some(n) = self.min_support {
            c.min_support = n;
        }
        if let Some(o) = self.overrides.get(kind.id()) {
            if let Some(v) = o.min_support {
                c.min_support = v;
            }
            if let Some(v) = o.rarity_factor {
                c.rarity_factor = v;
            }
            if let Some(v) = o.max_missing_facts {
                c.max_missing_facts = v;
            }
            if let Some(v) = o.strangeness_threshold {
                c.strangeness_threshold = v;
            }
            if let Some(v) = o.signature_mode {
                c.signature_mode = v;
            }
            if let Some(v) = o.interprocedural_depth {
                c.interprocedural_depth = v;
            }
            if let Some(v) = o.subtype_aware {
                c.subtype_aware = v;
            }
        }
        c
    }

    pub fn settings(&self, execution: Execution) -> Settings {
        let mut s = Settings::new(self.detectors.iter().map(|k| (*k, self.detector_config(*k))).collect());
        s.timeout = self.timeout;
        s.top_n = self.top_n;
        s.execution = execution;
        s
    }

    /// Hash of everything that affects experiment output. Paths, the
    /// timeout and the job count are left out.
    pub fn output_hash(&self) -> String {
        let configs: Vec<(&str, DetectorConfig)> =
            self.detectors.iter().map(|k| (k.id(), self.detector_config(*k))).collect();
        let v = serde_json::json!({
            "detectors": configs,
            "seed": self.seed,
            "top_n": self.top_n,
            "copies": self.copies,
        });
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}
