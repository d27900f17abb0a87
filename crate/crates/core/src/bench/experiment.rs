//! Experiments P, RUB and R over extracted models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::KnownMisuse;
use super::hits::{match_potential_hits, PotentialHit};
use crate::detect::{run_with, BuiltIn, DetectorConfig, DetectorKind, RunStatus};
use crate::model::{Finding, MethodUsageModel, Score, SourceLocation};
use crate::par::Execution;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown experiment `{0}` (expected p, rub or r)")]
    UnknownExperiment(String),
    #[error("copies must be at least 2, got {0}")]
    TooFewCopies(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    P,
    Rub,
    R,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [ExperimentKind::P, ExperimentKind::Rub, ExperimentKind::R];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::P => "p",
            ExperimentKind::Rub => "rub",
            ExperimentKind::R => "r",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| ExperimentError::UnknownExperiment(s.to_owned()))
    }
}

/// Extracted models of one project version.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VersionModels {
    pub project: String,
    pub version: String,
    pub models: Vec<MethodUsageModel>,
    pub supertypes: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub detectors: Vec<(DetectorKind, DetectorConfig)>,
    pub timeout: Duration,
    pub top_n: usize,
    pub execution: Execution,
}

impl Settings {
    pub fn new(detectors: Vec<(DetectorKind, DetectorConfig)>) -> Self {
        Self {
            detectors,
            timeout: Duration::from_secs(7200),
            top_n: 20,
            execution: Execution::default(),
        }
    }
}

/// Outcome of one experiment cell. Elapsed times are left out so that
/// exports stay reproducible.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: ExperimentKind,
    pub detector_id: String,
    pub project: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misuse: Option<String>,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Findings reported by the detector before truncation or filtering.
    pub total_findings: usize,
    pub exported_findings: usize,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.status == "completed"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingRecord {
    pub id: String,
    pub experiment: ExperimentKind,
    pub detector_id: String,
    pub project: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub misuse: Option<String>,
    /// 1-based position in the detector's ranking.
    pub rank: usize,
    pub score: Score,
    pub location: SourceLocation,
    pub missing: BTreeSet<String>,
    pub present: BTreeSet<String>,
    #[serde(default)]
    pub redundant: BTreeSet<String>,
    pub pattern: BTreeSet<String>,
    pub pattern_support: usize,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HitRecord {
    pub experiment: ExperimentKind,
    pub detector_id: String,
    pub finding_id: String,
    pub misuse_id: String,
    #[serde(default)]
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: ExperimentKind,
    pub runs: Vec<RunRecord>,
    pub findings: Vec<FindingRecord>,
    pub hits: Vec<HitRecord>,
}

impl ExperimentResult {
    fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            runs: Vec::new(),
            findings: Vec::new(),
            hits: Vec::new(),
        }
    }

    pub fn failed_runs(&self) -> usize {
        self.runs.iter().filter(|r| !r.succeeded()).count()
    }

    /// Stable order for export.
    pub fn sort(&mut self) {
        self.runs.sort();
        self.findings.sort_by(|a, b| a.id.cmp(&b.id));
        self.hits.sort();
        self.hits.dedup();
    }

    pub fn merge(&mut self, other: ExperimentResult) {
        self.runs.extend(other.runs);
        self.findings.extend(other.findings);
        self.hits.extend(other.hits);
        self.sort();
    }
}

fn record(
    id: String,
    experiment: ExperimentKind,
    project: &str,
    version: &str,
    misuse: Option<&str>,
    rank: usize,
    f: &Finding,
) -> FindingRecord {
    FindingRecord {
        id,
        experiment,
        detector_id: f.detector_id.clone(),
        project: project.to_owned(),
        version: version.to_owned(),
        misuse: misuse.map(str::to_owned),
        rank,
        score: f.score,
        location: f.location.clone(),
        missing: f.missing_facts.clone(),
        present: f.present_facts.clone(),
        redundant: f.redundant_facts.clone(),
        pattern: f.pattern_facts.clone(),
        pattern_support: f.pattern_support,
        metadata: f.metadata.clone(),
    }
}

fn run_record(
    experiment: ExperimentKind,
    detector: &str,
    project: &str,
    version: &str,
    misuse: Option<&str>,
    status: &RunStatus,
    exported: usize,
) -> RunRecord {
    RunRecord {
        experiment,
        detector_id: detector.to_owned(),
        project: project.to_owned(),
        version: version.to_owned(),
        misuse: misuse.map(str::to_owned),
        status: status.label().to_owned(),
        message: match status {
            RunStatus::Error { message } => Some(message.clone()),
            _ => None,
        },
        total_findings: status.findings().map_or(0, |f| f.findings.len()),
        exported_findings: exported,
    }
}

fn cell_config(base: &DetectorConfig, v: &VersionModels, exec: Execution) -> DetectorConfig {
    let mut c = base.clone();
    c.supertypes = v.supertypes.clone();
    c.execution = exec;
    c
}

/// Runs every (detector, version) cell. Inner mining stays sequential
/// when cells already run in parallel.
fn run_cells<'a>(
    versions: &'a [VersionModels],
    settings: &Settings,
) -> Vec<(DetectorKind, &'a VersionModels, RunStatus)> {
    let cells: Vec<(usize, usize)> = (0..settings.detectors.len())
        .flat_map(|d| (0..versions.len()).map(move |v| (d, v)))
        .collect();
    let statuses = settings.execution.map(&cells, |&(d, v)| {
        let (kind, base) = &settings.detectors[d];
        let cfg = cell_config(base, &versions[v], Execution::Sequential);
        log::info!("running {} on {}/{}", kind, versions[v].project, versions[v].version);
        run_with(&BuiltIn(*kind), &versions[v].models, &cfg, settings.timeout)
    });
    cells
        .into_iter()
        .zip(statuses)
        .map(|((d, v), s)| (settings.detectors[d].0, &versions[v], s))
        .collect()
}

fn hit_records(experiment: ExperimentKind, detector: &str, hits: Vec<PotentialHit>) -> Vec<HitRecord> {
    hits.into_iter()
        .map(|h| HitRecord {
            experiment,
            detector_id: detector.to_owned(),
            finding_id: h.finding_id,
            misuse_id: h.misuse_id,
            ambiguous: h.ambiguous,
        })
        .collect()
}

/// Experiment P: the top `top_n` findings per detector and version.
pub fn run_experiment_p(versions: &[VersionModels], settings: &Settings) -> ExperimentResult {
    let exp = ExperimentKind::P;
    let mut out = ExperimentResult::new(exp);
    for (kind, v, status) in run_cells(versions, settings) {
        let mut exported = 0;
        if let Some(ranked) = status.findings() {
            for (i, f) in ranked.findings.iter().take(settings.top_n).enumerate() {
                let id = format!("p/{}/{}/{}/{:03}", kind, v.project, v.version, i + 1);
                out.findings.push(record(id, exp, &v.project, &v.version, None, i + 1, f));
                exported += 1;
            }
        }
        out.runs.push(run_record(exp, kind.id(), &v.project, &v.version, None, &status, exported));
    }
    out.sort();
    out
}

/// Experiment R: full detection per version; only findings in the file
/// and method of a known misuse are exported.
pub fn run_experiment_r(
    versions: &[VersionModels],
    misuses: &[KnownMisuse],
    settings: &Settings,
) -> ExperimentResult {
    let exp = ExperimentKind::R;
    let mut out = ExperimentResult::new(exp);
    for (kind, v, status) in run_cells(versions, settings) {
        let mut exported = 0;
        if let Some(ranked) = status.findings() {
            let own: Vec<KnownMisuse> = misuses
                .iter()
                .filter(|m| m.location.project_id == v.project && m.location.version_id == v.version)
                .cloned()
                .collect();
            let ids: Vec<String> = (1..=ranked.findings.len())
                .map(|r| format!("r/{}/{}/{}/{:04}", kind, v.project, v.version, r))
                .collect();
            let hits = match_potential_hits(
                ids.iter().map(String::as_str).zip(ranked.findings.iter().map(|f| &f.location)),
                &own,
            );
            let hit_ids: BTreeSet<&str> = hits.iter().map(|h| h.finding_id.as_str()).collect();
            for (i, (id, f)) in ids.iter().zip(&ranked.findings).enumerate() {
                if hit_ids.contains(id.as_str()) {
                    out.findings.push(record(id.clone(), exp, &v.project, &v.version, None, i + 1, f));
                    exported += 1;
                }
            }
            out.hits.extend(hit_records(exp, kind.id(), hits));
        }
        out.runs.push(run_record(exp, kind.id(), &v.project, &v.version, None, &status, exported));
    }
    out.sort();
    out
}

pub const CRAFTED_PREFIX: &str = "__crafted__";

/// The RUB corpus: models from the misuse's file plus `copies` copies of
/// the crafted correct usage, each under its own file path.
pub fn rub_corpus(
    misuse: &KnownMisuse,
    misuse_models: &[MethodUsageModel],
    crafted: &[MethodUsageModel],
    copies: usize,
) -> Vec<MethodUsageModel> {
    let mut corpus = misuse_models.to_vec();
    for k in 1..=copies {
        for m in crafted {
            let mut c = m.clone();
            c.location.project_id = misuse.location.project_id.clone();
            c.location.version_id = misuse.location.version_id.clone();
            c.location.file_path = format!("{CRAFTED_PREFIX}/{}/copy-{k:02}/{}", misuse.id, m.location.file_path);
            corpus.push(c);
        }
    }
    corpus
}

pub fn is_crafted_copy(loc: &SourceLocation) -> bool {
    loc.file_path.starts_with(CRAFTED_PREFIX)
}

/// Input of one RUB cell: the misuse file's models and the crafted
/// usage's models, or why they could not be obtained. A failed input
/// excludes the misuse with an error record.
pub struct RubInput<'a> {
    pub misuse: &'a KnownMisuse,
    pub models: Result<(Vec<MethodUsageModel>, Vec<MethodUsageModel>), String>,
    pub supertypes: BTreeMap<String, BTreeSet<String>>,
}

/// Experiment RUB with `min_support = copies`.
pub fn run_experiment_rub(
    inputs: &[RubInput<'_>],
    copies: usize,
    settings: &Settings,
) -> Result<ExperimentResult, ExperimentError> {
    if copies < 2 {
        return Err(ExperimentError::TooFewCopies(copies));
    }
    let exp = ExperimentKind::Rub;
    let cells: Vec<(usize, usize)> = (0..settings.detectors.len())
        .flat_map(|d| (0..inputs.len()).map(move |i| (d, i)))
        .collect();
    let results = settings.execution.map(&cells, |&(d, i)| {
        let (kind, base) = &settings.detectors[d];
        let input = &inputs[i];
        let m = input.misuse;
        let (project, version) = (&m.location.project_id, &m.location.version_id);
        let (misuse_models, crafted) = match &input.models {
            Ok((m, c)) => (m, c),
            Err(message) => {
                let status = RunStatus::Error {
                    message: message.clone(),
                };
                return (run_record(exp, kind.id(), project, version, Some(&m.id), &status, 0), vec![], vec![]);
            }
        };
        let corpus = rub_corpus(m, misuse_models, crafted, copies);
        let mut cfg = base.clone().with_min_support(copies);
        cfg.supertypes = input.supertypes.clone();
        cfg.execution = Execution::Sequential;
        let status = run_with(&BuiltIn(*kind), &corpus, &cfg, settings.timeout);
        let mut findings = Vec::new();
        let mut hits = Vec::new();
        if let Some(ranked) = status.findings() {
            let ids: Vec<String> = (1..=ranked.findings.len())
                .map(|r| format!("rub/{}/{}/{:04}", kind, m.id, r))
                .collect();
            let ph = match_potential_hits(
                ids.iter().map(String::as_str).zip(ranked.findings.iter().map(|f| &f.location)),
                std::slice::from_ref(m),
            );
            let hit_ids: BTreeSet<&str> = ph.iter().map(|h| h.finding_id.as_str()).collect();
            for (r, (id, f)) in ids.iter().zip(&ranked.findings).enumerate() {
                if hit_ids.contains(id.as_str()) {
                    findings.push(record(id.clone(), exp, project, version, Some(&m.id), r + 1, f));
                }
            }
            hits = hit_records(exp, kind.id(), ph);
        }
        let run = run_record(exp, kind.id(), project, version, Some(&m.id), &status, findings.len());
        (run, findings, hits)
    });
    let mut out = ExperimentResult::new(exp);
    for (run, findings, hits) in results {
        out.runs.push(run);
        out.findings.extend(findings);
        out.hits.extend(hits);
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::testing::*;
    use crate::model::MucLabel;

    fn settings(kinds: &[DetectorKind]) -> Settings {
        let mut s = Settings::new(kinds.iter().map(|k| (*k, DetectorConfig::for_kind(*k))).collect());
        s.timeout = Duration::from_secs(60);
        s
    }

    fn misuse(id: &str, file: &str, method: &str) -> KnownMisuse {
        KnownMisuse {
            id: id.into(),
            location: SourceLocation::new("p", "v", file, method, None).unwrap(),
            description: String::new(),
            muc_labels: BTreeSet::from([MucLabel::from_str("missing/method-call").unwrap()]),
            fix_description: String::new(),
            crafted_usage: None,
        }
    }

    fn version(models: Vec<MethodUsageModel>) -> VersionModels {
        VersionModels {
            project: "p".into(),
            version: "v".into(),
            models,
            supertypes: BTreeMap::new(),
        }
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("RUB".parse::<ExperimentKind>().unwrap(), ExperimentKind::Rub);
        assert!("q".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn p_truncates_to_top_n() {
        let mut models = copies(100, "Writer", &["write", "close"]);
        for i in 0..3 {
            models.push(usage(&format!("bad/B{i}.java"), "m", "Writer", &["write"]));
        }
        let mut s = settings(&[DetectorKind::TypeUsage]);
        let r = run_experiment_p(&[version(models.clone())], &s);
        assert_eq!(r.findings.len(), 3);
        assert_eq!(r.runs[0].total_findings, 3);
        s.top_n = 2;
        let r = run_experiment_p(&[version(models)], &s);
        assert_eq!(r.findings.len(), 2);
        assert_eq!(r.findings.iter().map(|f| f.rank).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn failed_cells_do_not_abort() {
        let models = copies(30, "Writer", &["write", "close"]);
        let mut s = settings(&DetectorKind::ALL);
        s.timeout = Duration::ZERO;
        let r = run_experiment_p(&[version(models)], &s);
        assert_eq!(r.runs.len(), 4);
        assert_eq!(r.failed_runs(), 4);
        assert!(r.runs.iter().all(|x| x.status == "timeout"));
    }

    #[test]
    fn r_exports_only_potential_hits() {
        let mut models = copies(60, "Writer", &["write", "close"]);
        models.push(usage("bad/B0.java", "m", "Writer", &["write"]));
        models.push(usage("bad/B1.java", "m", "Writer", &["write"]));
        let known = [misuse("m1", "bad/B0.java", "m")];
        let r = run_experiment_r(&[version(models)], &known, &settings(&[DetectorKind::TypeUsage]));
        assert_eq!(r.runs[0].total_findings, 2);
        assert_eq!(r.findings.len(), 1);
        assert_eq!(r.hits.len(), 1);
        assert_eq!(r.hits[0].misuse_id, "m1");
    }

    #[test]
    fn r_misses_without_enough_correct_usages() {
        let models = vec![
            usage("ok/A.java", "m", "Writer", &["write", "close"]),
            usage("bad/B0.java", "m", "Writer", &["write"]),
        ];
        let known = [misuse("m1", "bad/B0.java", "m")];
        let r = run_experiment_r(&[version(models)], &known, &settings(&[DetectorKind::CallSet]));
        assert!(r.hits.is_empty());
    }

    #[test]
    fn rub_finds_single_missing_call() {
        let m = misuse("m1", "bad/B0.java", "m");
        let input = RubInput {
            misuse: &m,
            models: Ok((
                vec![usage("bad/B0.java", "m", "Writer", &["write"])],
                vec![usage("Crafted.java", "m", "Writer", &["write", "close"])],
            )),
            supertypes: BTreeMap::new(),
        };
        let r = run_experiment_rub(&[input], 50, &settings(&[DetectorKind::TypeUsage, DetectorKind::CallSet])).unwrap();
        assert_eq!(r.runs.len(), 2);
        assert_eq!(r.hits.len(), 2);
        assert!(r.findings.iter().all(|f| !is_crafted_copy(&f.location)));
        let tu = r.findings.iter().find(|f| f.detector_id == "type-usage").unwrap();
        assert_eq!(tu.score, Score::Finite(1.0));
    }

    #[test]
    fn rub_records_unparseable_crafted_usage() {
        let m = misuse("m1", "bad/B0.java", "m");
        let input = RubInput {
            misuse: &m,
            models: Err("crafted usage: syntax error".into()),
            supertypes: BTreeMap::new(),
        };
        let r = run_experiment_rub(&[input], 50, &settings(&[DetectorKind::CallSet])).unwrap();
        assert_eq!(r.runs[0].status, "error");
        assert!(r.runs[0].message.as_deref().unwrap().contains("syntax error"));
        assert!(run_experiment_rub(&[], 1, &settings(&[])).is_err());
    }

    #[test]
    fn corpus_copies_have_distinct_paths() {
        let m = misuse("m1", "bad/B0.java", "m");
        let crafted = vec![usage("Crafted.java", "m", "Writer", &["write", "close"])];
        let c = rub_corpus(&m, &[], &crafted, 3);
        let paths: BTreeSet<_> = c.iter().map(|x| x.location.file_path.clone()).collect();
        assert_eq!(paths.len(), 3);
        assert!(c.iter().all(|x| is_crafted_copy(&x.location)));
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let mut models = copies(25, "Writer", &["write", "close"]);
        models.push(usage("bad/B0.java", "m", "Writer", &["write"]));
        let mut s = settings(&DetectorKind::ALL);
        let a = run_experiment_p(&[version(models.clone())], &s);
        s.execution = Execution::Sequential;
        let b = run_experiment_p(&[version(models)], &s);
        assert_eq!(a, b);
    }
}
