//! Pipeline stages over a workspace directory.
//!
//! Workspace layout:
//!
//! ```text
//! checkouts/<project>/<version>/      source trees (see bench::checkout)
//! facts/<project>/<version>.facts     extracted models
//! facts/<project>/<version>.meta.json source hash, supertypes, warnings
//! results/detect/<project>/<version>/ per-detector runs of `detect`
//! results/<p|rub|r>/                  runs.jsonl findings.jsonl hits.jsonl
//!                                     misuses.json summary.csv key
//! review/store.jsonl                  assessment log
//! ```
//!
//! Extraction is skipped when the checkout's tree hash matches the
//! cached facts. Experiments are skipped when their input key matches.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bench::checkout::{checkout, CheckoutError, CheckoutInfo};
use crate::bench::dataset::{Dataset, DatasetError, KnownMisuse, ProjectVersion};
use crate::bench::experiment::{
    run_experiment_p, run_experiment_r, run_experiment_rub, ExperimentError, ExperimentKind, ExperimentResult,
    RubInput, VersionModels,
};
use crate::bench::export::{read_jsonl, read_result, write_jsonl, write_result, ExportError};
use crate::config::RunConfig;
use crate::detect::{run_with, BuiltIn, DetectorKind, RunStatus};
use crate::extract::{extract_tree, load_facts_file, parse_method_models, write_facts_file, ExtractError, ExtractWarning};
use crate::model::{CapabilityMatrix, Finding, MethodUsageModel};
use crate::par::Execution;
use crate::review::{experiment_stats, Decision, DetectorStats, ReviewError, ReviewStore, StatsContext};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Checkout(#[from] CheckoutError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Review(#[from] ReviewError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("no results for experiment {0}; run it first")]
    NoResults(ExperimentKind),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.to_owned(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn facts_path(&self, project: &str, version: &str) -> PathBuf {
        self.root.join("facts").join(project).join(format!("{version}.facts"))
    }

    pub fn meta_path(&self, project: &str, version: &str) -> PathBuf {
        self.root.join("facts").join(project).join(format!("{version}.meta.json"))
    }

    pub fn results_dir(&self, exp: ExperimentKind) -> PathBuf {
        crate::bench::export::results_dir(&self.root, exp)
    }

    pub fn detect_dir(&self, project: &str, version: &str) -> PathBuf {
        self.root.join("results").join("detect").join(project).join(version)
    }

    pub fn store_path(&self) -> PathBuf {
        self.root.join("review").join("store.jsonl")
    }

    pub fn checkout_dir(&self, project: &str, version: &str) -> PathBuf {
        self.root.join("checkouts").join(project).join(version)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FactsMeta {
    source_hash: String,
    source_roots: Vec<String>,
    supertypes: BTreeMap<String, BTreeSet<String>>,
    warnings: Vec<ExtractWarning>,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub models: VersionModels,
    pub checkout: PathBuf,
    pub warnings: Vec<ExtractWarning>,
    /// Facts were reused from an earlier run.
    pub cached: bool,
    pub source_hash: String,
}

/// An experiment run's result and whether it came from cache.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: ExperimentResult,
    pub cached: bool,
}

pub struct Pipeline {
    pub dataset: Dataset,
    pub workspace: Workspace,
    pub config: RunConfig,
    pub execution: Execution,
}

fn sha(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

impl Pipeline {
    pub fn new(config: RunConfig, execution: Execution) -> Result<Self, PipelineError> {
        let dataset = Dataset::load(&config.dataset)?;
        Ok(Self {
            dataset,
            workspace: Workspace::new(config.workspace.clone()),
            config,
            execution,
        })
    }

    pub fn checkout(&self, v: &ProjectVersion) -> Result<(PathBuf, CheckoutInfo), PipelineError> {
        Ok(checkout(&self.dataset.root, &self.workspace.root, v)?)
    }

    /// Checks out and extracts `v`, reusing cached facts when the source
    /// tree is unchanged.
    pub fn prepare(&self, v: &ProjectVersion) -> Result<Prepared, PipelineError> {
        let (dir, info) = self.checkout(v)?;
        let facts = self.workspace.facts_path(&v.project, &v.version);
        let meta_path = self.workspace.meta_path(&v.project, &v.version);
        let cached_meta: Option<FactsMeta> = std::fs::read_to_string(&meta_path)
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok());
        if let Some(meta) = cached_meta {
            if meta.source_hash == info.tree_hash && meta.source_roots == v.source_roots && facts.is_file() {
                if let Ok(models) = load_facts_file(&facts) {
                    log::info!("{}: facts up to date", v.key());
                    return Ok(Prepared {
                        models: VersionModels {
                            project: v.project.clone(),
                            version: v.version.clone(),
                            models,
                            supertypes: meta.supertypes,
                        },
                        checkout: dir,
                        warnings: meta.warnings,
                        cached: true,
                        source_hash: info.tree_hash,
                    });
                }
            }
        }
        log::info!("{}: extracting", v.key());
        let ex = extract_tree(&dir, &v.source_roots, &v.project, &v.version, self.execution)?;
        for w in &ex.warnings {
            log::warn!("{}: {}: {}", v.key(), w.file, w.message);
        }
        if let Some(parent) = facts.parent() {
            std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
        }
        write_facts_file(&ex.models, &facts)?;
        let meta = FactsMeta {
            source_hash: info.tree_hash.clone(),
            source_roots: v.source_roots.clone(),
            supertypes: ex.supertypes.clone(),
            warnings: ex.warnings.clone(),
        };
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        std::fs::write(&meta_path, text).map_err(|e| io_err(&meta_path, e))?;
        Ok(Prepared {
            models: VersionModels {
                project: v.project.clone(),
                version: v.version.clone(),
                models: ex.models,
                supertypes: ex.supertypes,
            },
            checkout: dir,
            warnings: ex.warnings,
            cached: false,
            source_hash: info.tree_hash,
        })
    }

    /// Models from an external facts file instead of the workspace.
    pub fn load_facts(&self, v: &ProjectVersion, path: &Path) -> Result<VersionModels, PipelineError> {
        Ok(VersionModels {
            project: v.project.clone(),
            version: v.version.clone(),
            models: load_facts_file(path)?,
            supertypes: BTreeMap::new(),
        })
    }

    /// Runs every selected detector on one version. Findings go to
    /// `results/detect/<project>/<version>/<detector>.jsonl`.
    pub fn detect(&self, models: &VersionModels) -> Result<Vec<(DetectorKind, RunStatus)>, PipelineError> {
        let settings = self.config.settings(self.execution);
        let statuses = self.execution.map(&settings.detectors, |(kind, base)| {
            let mut cfg = base.clone();
            cfg.supertypes = models.supertypes.clone();
            cfg.execution = Execution::Sequential;
            run_with(&BuiltIn(*kind), &models.models, &cfg, settings.timeout)
        });
        let dir = self.workspace.detect_dir(&models.project, &models.version);
        let mut out = Vec::new();
        for ((kind, _), status) in settings.detectors.iter().zip(statuses) {
            let findings: &[Finding] = status.findings().map_or(&[], |f| &f.findings);
            write_jsonl(&dir.join(format!("{kind}.jsonl")), findings)?;
            out.push((*kind, status));
        }
        Ok(out)
    }

    fn versions(&self) -> Vec<&ProjectVersion> {
        self.dataset.project_versions().collect()
    }

    fn prepare_all(&self) -> Result<Vec<Prepared>, PipelineError> {
        self.versions().into_iter().map(|v| self.prepare(v)).collect()
    }

    fn cached(&self, exp: ExperimentKind, key: &str) -> Option<ExperimentResult> {
        let dir = self.workspace.results_dir(exp);
        let stored = std::fs::read_to_string(dir.join("key")).ok()?;
        if stored.trim() != key {
            return None;
        }
        read_result(&dir, exp).ok()
    }

    fn save(&self, result: &ExperimentResult, misuses: &[KnownMisuse], key: Option<&str>) -> Result<(), PipelineError> {
        let dir = self.workspace.results_dir(result.experiment);
        write_result(&dir, result)?;
        let path = dir.join("misuses.json");
        let text = serde_json::to_string_pretty(misuses).expect("misuses serialize");
        std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        let key_path = dir.join("key");
        match key {
            Some(k) => std::fs::write(&key_path, format!("{k}\n")).map_err(|e| io_err(&key_path, e))?,
            None => {
                let _ = std::fs::remove_file(&key_path);
            }
        }
        Ok(())
    }

    pub fn run_p(&self) -> Result<Outcome, PipelineError> {
        let prepared = self.prepare_all()?;
        let hashes: Vec<&str> = prepared.iter().map(|p| p.source_hash.as_str()).collect();
        let key = sha(&[&["p", &self.config.output_hash()], hashes.as_slice()].concat());
        if let Some(result) = self.cached(ExperimentKind::P, &key) {
            return Ok(Outcome { result, cached: true });
        }
        let versions: Vec<VersionModels> = prepared.into_iter().map(|p| p.models).collect();
        let result = run_experiment_p(&versions, &self.config.settings(self.execution));
        self.save(&result, &[], Some(&key))?;
        Ok(Outcome { result, cached: false })
    }

    /// Dataset misuses of the project versions plus findings confirmed in
    /// experiment P that do not coincide with a known misuse.
    pub fn r_misuse_set(&self) -> Result<Vec<KnownMisuse>, PipelineError> {
        let keys: BTreeSet<String> = self.versions().iter().map(|v| v.key()).collect();
        let mut set: Vec<KnownMisuse> =
            self.dataset.misuses.iter().filter(|m| keys.contains(&m.version_key())).cloned().collect();
        let p_dir = self.workspace.results_dir(ExperimentKind::P);
        let store_path = self.workspace.store_path();
        if p_dir.join("findings.jsonl").is_file() && store_path.is_file() {
            let p = read_result(&p_dir, ExperimentKind::P)?;
            let store = ReviewStore::open(&store_path)?;
            for f in &p.findings {
                if store.state(&f.id).final_decision() != Some(Decision::Misuse) {
                    continue;
                }
                let same = |m: &KnownMisuse| {
                    m.version_key() == format!("{}/{}", f.project, f.version)
                        && m.location.file_path == f.location.file_path
                        && m.location.method_name.split('(').next() == Some(f.location.method_name.as_str())
                };
                if set.iter().any(same) {
                    continue;
                }
                set.push(KnownMisuse {
                    id: format!("confirmed:{}", f.id),
                    location: f.location.clone(),
                    description: format!("Confirmed in experiment p ({}).", f.detector_id),
                    muc_labels: BTreeSet::new(),
                    fix_description: String::new(),
                    crafted_usage: None,
                });
            }
        }
        set.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(set)
    }

    pub fn run_r(&self) -> Result<Outcome, PipelineError> {
        let prepared = self.prepare_all()?;
        let misuses = self.r_misuse_set()?;
        let misuse_text = serde_json::to_string(&misuses).expect("serialize");
        let hashes: Vec<&str> = prepared.iter().map(|p| p.source_hash.as_str()).collect();
        let key = sha(&[&["r", &self.config.output_hash(), &misuse_text], hashes.as_slice()].concat());
        if let Some(result) = self.cached(ExperimentKind::R, &key) {
            return Ok(Outcome { result, cached: true });
        }
        let versions: Vec<VersionModels> = prepared.into_iter().map(|p| p.models).collect();
        let result = run_experiment_r(&versions, &misuses, &self.config.settings(self.execution));
        self.save(&result, &misuses, Some(&key))?;
        Ok(Outcome { result, cached: false })
    }

    fn rub_input<'a>(&self, m: &'a KnownMisuse) -> Result<(RubInput<'a>, String), PipelineError> {
        let v = self.dataset.version(&m.version_key())?;
        let (dir, info) = self.checkout(v)?;
        let mut supertypes: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut parse = |path: &Path, rel: &str, what: &str| -> Result<Vec<MethodUsageModel>, String> {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{what}: {}: {e}", path.display()))?;
            let parsed = parse_method_models(&text, rel, &v.project, &v.version).map_err(|e| format!("{what}: {e}"))?;
            for (k, s) in parsed.supertypes {
                supertypes.entry(k).or_default().extend(s);
            }
            Ok(parsed.models)
        };
        let misuse_models = parse(&dir.join(&m.location.file_path), &m.location.file_path, "misuse file");
        let crafted_text;
        let crafted = match &m.crafted_usage {
            None => {
                crafted_text = String::new();
                Err("no crafted usage".to_owned())
            }
            Some(c) => {
                let path = self.dataset.root.join(c);
                crafted_text = std::fs::read_to_string(&path).unwrap_or_default();
                let name = Path::new(c).file_name().map_or(c.clone(), |n| n.to_string_lossy().into_owned());
                parse(&path, &name, "crafted usage")
            }
        };
        let models = match (misuse_models, crafted) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            (Err(e), _) | (_, Err(e)) => Err(e),
        };
        let key = sha(&[&m.id, &info.tree_hash, &crafted_text, &serde_json::to_string(m).expect("serialize")]);
        Ok((
            RubInput {
                misuse: m,
                models,
                supertypes,
            },
            key,
        ))
    }

    /// Experiment RUB over every misuse with a crafted usage, or over one
    /// misuse whose records then replace that misuse's earlier records.
    pub fn run_rub(&self, only: Option<&str>) -> Result<Outcome, PipelineError> {
        let misuses: Vec<&KnownMisuse> = match only {
            Some(id) => vec![self.dataset.misuse(id)?],
            None => self.dataset.misuses.iter().filter(|m| m.crafted_usage.is_some()).collect(),
        };
        let mut inputs = Vec::new();
        let mut keys = vec!["rub".to_owned(), self.config.output_hash()];
        for m in &misuses {
            let (input, key) = self.rub_input(m)?;
            inputs.push(input);
            keys.push(key);
        }
        let key = sha(&keys.iter().map(String::as_str).collect::<Vec<_>>());
        if only.is_none() {
            if let Some(result) = self.cached(ExperimentKind::Rub, &key) {
                return Ok(Outcome { result, cached: true });
            }
        }
        let mut result = run_experiment_rub(&inputs, self.config.copies, &self.config.settings(self.execution))?;
        let mut used: Vec<KnownMisuse> = misuses.iter().map(|m| (*m).clone()).collect();
        let dir = self.workspace.results_dir(ExperimentKind::Rub);
        if let Some(id) = only {
            if let Ok(mut old) = read_result(&dir, ExperimentKind::Rub) {
                old.runs.retain(|r| r.misuse.as_deref() != Some(id));
                old.findings.retain(|f| f.misuse.as_deref() != Some(id));
                let dropped: BTreeSet<String> = result.findings.iter().map(|f| f.id.clone()).collect();
                old.hits.retain(|h| h.misuse_id != id && !dropped.contains(&h.finding_id));
                old.merge(result);
                result = old;
            }
            let old_misuses: Vec<KnownMisuse> = read_misuses(&dir).unwrap_or_default();
            used.extend(old_misuses.into_iter().filter(|m| m.id != id));
            used.sort_by(|a, b| a.id.cmp(&b.id));
        }
        self.save(&result, &used, only.is_none().then_some(key.as_str()))?;
        Ok(Outcome { result, cached: false })
    }

    pub fn load_result(&self, exp: ExperimentKind) -> Result<ExperimentResult, PipelineError> {
        let dir = self.workspace.results_dir(exp);
        if !dir.join("runs.jsonl").is_file() {
            return Err(PipelineError::NoResults(exp));
        }
        Ok(read_result(&dir, exp)?)
    }

    /// Statistics for an exported experiment; also writes `summary.csv`.
    pub fn stats(&self, exp: ExperimentKind, primary: &[String]) -> Result<Vec<DetectorStats>, PipelineError> {
        let result = self.load_result(exp)?;
        let store = ReviewStore::open(&self.workspace.store_path())?;
        let dir = self.workspace.results_dir(exp);
        let ctx = stats_context(&dir, primary);
        let stats = experiment_stats(&result, &store, &ctx);
        let csv = crate::review::summary_csv(exp, &stats);
        let path = dir.join("summary.csv");
        std::fs::write(&path, csv).map_err(|e| io_err(&path, e))?;
        Ok(stats)
    }
}

pub fn read_misuses(results_dir: &Path) -> Result<Vec<KnownMisuse>, PipelineError> {
    let path = results_dir.join("misuses.json");
    let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(&path, e))
}

/// Statistics context from an experiment's exported misuse list.
pub fn stats_context(results_dir: &Path, primary: &[String]) -> StatsContext {
    let misuses = read_misuses(results_dir).unwrap_or_default();
    StatsContext {
        primary: primary.to_vec(),
        known_misuses: Some(misuses.len()),
        misuse_labels: misuses.into_iter().map(|m| (m.id, m.muc_labels)).collect(),
        matrix: Some(CapabilityMatrix::surveyed()),
    }
}

/// Reads exported findings of `detect` for one detector.
pub fn read_detect_findings(ws: &Workspace, project: &str, version: &str, kind: DetectorKind) -> Result<Vec<Finding>, PipelineError> {
    Ok(read_jsonl(&ws.detect_dir(project, version).join(format!("{kind}.jsonl")))?)
}
