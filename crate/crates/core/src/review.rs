//! Two-reviewer assessment store and experiment statistics.
//!
//! The store is an append-only JSON-lines log. Every append is synced
//! before it returns; `compact` rewrites the log through a temporary file
//! and an atomic rename.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::experiment::{ExperimentKind, ExperimentResult};
use crate::bench::metrics::{cohens_kappa, conceptual_rub, Ratio};
use crate::model::{CapabilityMatrix, MucLabel};

/// Shown with every review task.
pub const REVIEWER_GUIDANCE: &str = "Judge leniently: a finding identifies the misuse if it points at \
the misused API in the right place, even when it describes the problem differently. Missing calls \
may indicate missing condition checks.";

/// Assessments needed before a finding counts.
pub const REQUIRED_REVIEWS: usize = 2;

#[derive(Debug, Error)]
pub enum ReviewError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: corrupt store record: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    InvalidRootCause(String),
    #[error("finding `{finding}` has {have} assessment(s); resolution needs {REQUIRED_REVIEWS}")]
    PrematureResolution { finding: String, have: usize },
    #[error("unknown {kind} `{value}`")]
    UnknownValue { kind: &'static str, value: String },
}

fn io(path: &Path, source: std::io::Error) -> ReviewError {
    ReviewError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Misuse,
    NotMisuse,
}

impl FromStr for Decision {
    type Err = ReviewError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "misuse" => Ok(Decision::Misuse),
            "not-misuse" => Ok(Decision::NotMisuse),
            _ => Err(ReviewError::UnknownValue {
                kind: "decision",
                value: s.to_owned(),
            }),
        }
    }
}

/// Why a reported finding is not a misuse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FpRootCause {
    Uncommon,
    Analysis,
    Alternative,
    Inside,
    Dependent,
    Bug,
    Multiplicity,
}

impl FpRootCause {
    pub const ALL: [FpRootCause; 7] = [
        FpRootCause::Uncommon,
        FpRootCause::Analysis,
        FpRootCause::Alternative,
        FpRootCause::Inside,
        FpRootCause::Dependent,
        FpRootCause::Bug,
        FpRootCause::Multiplicity,
    ];
}

/// Why a known misuse was not identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FnRootCause {
    Representation,
    Matching,
    Analysis,
    Bug,
    Lenient,
    ExceptionHandling,
}

impl FnRootCause {
    pub const ALL: [FnRootCause; 6] = [
        FnRootCause::Representation,
        FnRootCause::Matching,
        FnRootCause::Analysis,
        FnRootCause::Bug,
        FnRootCause::Lenient,
        FnRootCause::ExceptionHandling,
    ];
}

macro_rules! display_via_serde {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
                f.write_str(v.as_str().ok_or(fmt::Error)?)
            }
        }
    )*};
}
display_via_serde!(Decision, FpRootCause, FnRootCause);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assessment {
    pub finding_id: String,
    pub reviewer: String,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fp_root_cause: Option<FpRootCause>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fn_root_cause: Option<FnRootCause>,
    #[serde(default)]
    pub comment: String,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

impl Assessment {
    /// Root causes must fit the decision and experiment.
    pub fn validate(&self, experiment: ExperimentKind) -> Result<(), ReviewError> {
        if self.fp_root_cause.is_some() && !(self.decision == Decision::NotMisuse && experiment == ExperimentKind::P) {
            return Err(ReviewError::InvalidRootCause(
                "fp_root_cause is only allowed for not-misuse decisions in experiment p".into(),
            ));
        }
        if self.fn_root_cause.is_some() && !(self.decision == Decision::NotMisuse && experiment != ExperimentKind::P) {
            return Err(ReviewError::InvalidRootCause(
                "fn_root_cause is only allowed for not-misuse decisions in experiments rub and r".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub finding_id: String,
    pub reviewer: String,
    pub decision: Decision,
    #[serde(default)]
    pub note: String,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum StoreRecord {
    Assessment(Assessment),
    Resolution(Resolution),
}

pub fn now_millis() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Review state of one finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewState {
    pub finding_id: String,
    pub assessments: Vec<Assessment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Resolution>,
}

impl ReviewState {
    pub fn gate_satisfied(&self) -> bool {
        self.assessments.len() >= REQUIRED_REVIEWS
    }

    pub fn disagreement(&self) -> bool {
        let ds: BTreeSet<Decision> = self.assessments.iter().map(|a| a.decision).collect();
        ds.len() > 1
    }

    /// The resolution if present, else the unanimous decision. `None`
    /// until the gate is satisfied.
    pub fn final_decision(&self) -> Option<Decision> {
        if !self.gate_satisfied() {
            return None;
        }
        if let Some(r) = &self.resolution {
            return Some(r.decision);
        }
        let ds: BTreeSet<Decision> = self.assessments.iter().map(|a| a.decision).collect();
        (ds.len() == 1).then(|| *ds.iter().next().expect("one decision"))
    }

    /// "n/2" progress label, capped at the requirement.
    pub fn progress(&self) -> String {
        format!("{}/{}", self.assessments.len().min(REQUIRED_REVIEWS), REQUIRED_REVIEWS)
    }
}

#[derive(Debug)]
pub struct ReviewStore {
    path: PathBuf,
    assessments: BTreeMap<String, BTreeMap<String, Assessment>>,
    resolutions: BTreeMap<String, Resolution>,
    log_records: usize,
}

impl ReviewStore {
    /// Opens or creates the log at `path` and replays it.
    pub fn open(path: &Path) -> Result<Self, ReviewError> {
        let mut store = Self {
            path: path.to_owned(),
            assessments: BTreeMap::new(),
            resolutions: BTreeMap::new(),
            log_records: 0,
        };
        if path.exists() {
            let file = std::fs::File::open(path).map_err(|e| io(path, e))?;
            for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: StoreRecord = serde_json::from_str(&line).map_err(|e| ReviewError::Corrupt {
                    path: path.to_owned(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                store.apply(rec);
                store.log_records += 1;
            }
        } else if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        }
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn apply(&mut self, rec: StoreRecord) {
        match rec {
            StoreRecord::Assessment(a) => {
                let slot = self.assessments.entry(a.finding_id.clone()).or_default();
                // Last write wins; equal timestamps fall back to log order.
                if slot.get(&a.reviewer).is_none_or(|old| old.timestamp <= a.timestamp) {
                    slot.insert(a.reviewer.clone(), a);
                }
            }
            StoreRecord::Resolution(r) => {
                if self.resolutions.get(&r.finding_id).is_none_or(|old| old.timestamp <= r.timestamp) {
                    self.resolutions.insert(r.finding_id.clone(), r);
                }
            }
        }
    }

    fn append(&mut self, rec: StoreRecord) -> Result<(), ReviewError> {
        let line = serde_json::to_string(&rec).expect("store records serialize");
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| io(&self.path, e))?;
        writeln!(file, "{line}").map_err(|e| io(&self.path, e))?;
        file.sync_data().map_err(|e| io(&self.path, e))?;
        self.apply(rec);
        self.log_records += 1;
        Ok(())
    }

    /// Records an assessment, replacing the reviewer's earlier one.
    pub fn assess(&mut self, experiment: ExperimentKind, a: Assessment) -> Result<(), ReviewError> {
        a.validate(experiment)?;
        self.append(StoreRecord::Assessment(a))
    }

    pub fn resolve(&mut self, r: Resolution) -> Result<(), ReviewError> {
        let have = self.assessments.get(&r.finding_id).map_or(0, BTreeMap::len);
        if have < REQUIRED_REVIEWS {
            return Err(ReviewError::PrematureResolution {
                finding: r.finding_id,
                have,
            });
        }
        self.append(StoreRecord::Resolution(r))
    }

    pub fn state(&self, finding_id: &str) -> ReviewState {
        ReviewState {
            finding_id: finding_id.to_owned(),
            assessments: self
                .assessments
                .get(finding_id)
                .map(|m| m.values().cloned().collect())
                .unwrap_or_default(),
            resolution: self.resolutions.get(finding_id).cloned(),
        }
    }

    pub fn reviewers(&self) -> BTreeSet<&str> {
        self.assessments.values().flat_map(|m| m.keys().map(String::as_str)).collect()
    }

    /// Records currently held, versus records in the log.
    pub fn live_records(&self) -> usize {
        self.assessments.values().map(BTreeMap::len).sum::<usize>() + self.resolutions.len()
    }

    pub fn log_records(&self) -> usize {
        self.log_records
    }

    /// Rewrites the log with only the live records.
    pub fn compact(&mut self) -> Result<(), ReviewError> {
        let tmp = self.path.with_extension("compact.tmp");
        {
            let mut file = std::fs::File::create(&tmp).map_err(|e| io(&tmp, e))?;
            let mut buf = String::new();
            for a in self.assessments.values().flat_map(BTreeMap::values) {
                buf.push_str(&serde_json::to_string(&StoreRecord::Assessment(a.clone())).expect("serialize"));
                buf.push('\n');
            }
            for r in self.resolutions.values() {
                buf.push_str(&serde_json::to_string(&StoreRecord::Resolution(r.clone())).expect("serialize"));
                buf.push('\n');
            }
            file.write_all(buf.as_bytes()).map_err(|e| io(&tmp, e))?;
            file.sync_all().map_err(|e| io(&tmp, e))?;
        }
        std::fs::rename(&tmp, &self.path).map_err(|e| io(&self.path, e))?;
        self.log_records = self.live_records();
        Ok(())
    }

    /// Compacts when the log holds more than twice the live records.
    pub fn maybe_compact(&mut self) -> Result<bool, ReviewError> {
        if self.log_records > 64 && self.log_records > 2 * self.live_records() {
            self.compact()?;
            return Ok(true);
        }
        Ok(false)
    }
}

/// Context for statistics beyond the exported records.
#[derive(Debug, Clone, Default)]
pub struct StatsContext {
    /// The two reviewers whose first-round decisions enter kappa. When
    /// empty, the first two reviewers by id are used.
    pub primary: Vec<String>,
    /// Known misuse labels, for conceptual recall upper bounds.
    pub misuse_labels: BTreeMap<String, BTreeSet<MucLabel>>,
    pub matrix: Option<CapabilityMatrix>,
    /// Size of the misuse set for experiment R, if known.
    pub known_misuses: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completeness {
    pub complete: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioView {
    pub num: u64,
    pub den: u64,
    pub value: f64,
    pub display: String,
}

impl From<Ratio> for RatioView {
    fn from(r: Ratio) -> Self {
        Self {
            num: r.num,
            den: r.den,
            value: r.value(),
            display: r.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorStats {
    pub experiment: ExperimentKind,
    pub detector_id: String,
    pub findings: usize,
    pub completeness: Completeness,
    /// Findings past the gate with a final decision.
    pub reviewed: usize,
    pub confirmed: usize,
    /// Gated findings whose reviewers disagree and await resolution.
    pub unresolved: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<RatioView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_misuses: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential_hits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actual_hits: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<RatioView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical_rub: Option<RatioView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conceptual_rub: Option<RatioView>,
    pub fp_root_causes: BTreeMap<String, usize>,
    pub fn_root_causes: BTreeMap<String, usize>,
}

fn primary_pair(store: &ReviewStore, ctx: &StatsContext) -> Option<(String, String)> {
    match ctx.primary.as_slice() {
        [a, b, ..] => Some((a.clone(), b.clone())),
        _ => {
            let r: Vec<&str> = store.reviewers().into_iter().collect();
            (r.len() >= 2).then(|| (r[0].to_owned(), r[1].to_owned()))
        }
    }
}

/// Most frequent root cause among not-misuse assessments, ties to the
/// smallest.
fn dominant<T: Ord + Copy>(items: impl Iterator<Item = T>) -> Option<T> {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    for i in items {
        *counts.entry(i).or_default() += 1;
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|(_, n)| *n == best).map(|(k, _)| k)
}

/// Per-detector statistics. Only findings past the two-review gate with
/// a final decision are counted.
pub fn experiment_stats(
    result: &ExperimentResult,
    store: &ReviewStore,
    ctx: &StatsContext,
) -> Vec<DetectorStats> {
    let exp = result.experiment;
    let primary = primary_pair(store, ctx);
    let mut detectors: BTreeSet<&str> = result.runs.iter().map(|r| r.detector_id.as_str()).collect();
    detectors.extend(result.findings.iter().map(|f| f.detector_id.as_str()));

    let mut out = Vec::new();
    for det in detectors {
        let findings: Vec<_> = result.findings.iter().filter(|f| f.detector_id == det).collect();
        let mut s = DetectorStats {
            experiment: exp,
            detector_id: det.to_owned(),
            findings: findings.len(),
            completeness: Completeness { complete: 0, total: findings.len() },
            reviewed: 0,
            confirmed: 0,
            unresolved: 0,
            precision: None,
            kappa: None,
            known_misuses: None,
            potential_hits: None,
            actual_hits: None,
            recall: None,
            empirical_rub: None,
            conceptual_rub: None,
            fp_root_causes: BTreeMap::new(),
            fn_root_causes: BTreeMap::new(),
        };
        if exp == ExperimentKind::P {
            for c in FpRootCause::ALL {
                s.fp_root_causes.insert(c.to_string(), 0);
            }
        } else {
            for c in FnRootCause::ALL {
                s.fn_root_causes.insert(c.to_string(), 0);
            }
        }
        let mut pairs = Vec::new();
        let mut confirmed_ids = BTreeSet::new();
        for f in &findings {
            let st = store.state(&f.id);
            if !st.gate_satisfied() {
                continue;
            }
            s.completeness.complete += 1;
            if let Some((a, b)) = &primary {
                let da = st.assessments.iter().find(|x| &x.reviewer == a);
                let db = st.assessments.iter().find(|x| &x.reviewer == b);
                if let (Some(da), Some(db)) = (da, db) {
                    pairs.push((da.decision == Decision::Misuse, db.decision == Decision::Misuse));
                }
            }
            match st.final_decision() {
                None => s.unresolved += 1,
                Some(d) => {
                    s.reviewed += 1;
                    if d == Decision::Misuse {
                        s.confirmed += 1;
                        confirmed_ids.insert(f.id.as_str());
                    } else {
                        let nots = || st.assessments.iter().filter(|a| a.decision == Decision::NotMisuse);
                        if let Some(c) = dominant(nots().filter_map(|a| a.fp_root_cause)) {
                            *s.fp_root_causes.entry(c.to_string()).or_default() += 1;
                        }
                        if let Some(c) = dominant(nots().filter_map(|a| a.fn_root_cause)) {
                            *s.fn_root_causes.entry(c.to_string()).or_default() += 1;
                        }
                    }
                }
            }
        }
        s.kappa = cohens_kappa(&pairs).ok();
        match exp {
            ExperimentKind::P => {
                s.precision = Ratio::new(s.confirmed as u64, s.reviewed as u64).ok().map(Into::into);
            }
            ExperimentKind::Rub | ExperimentKind::R => {
                let hits: Vec<_> = result.hits.iter().filter(|h| h.detector_id == det).collect();
                let potential: BTreeSet<&str> = hits.iter().map(|h| h.misuse_id.as_str()).collect();
                let actual: BTreeSet<&str> = hits
                    .iter()
                    .filter(|h| confirmed_ids.contains(h.finding_id.as_str()))
                    .map(|h| h.misuse_id.as_str())
                    .collect();
                s.potential_hits = Some(potential.len());
                s.actual_hits = Some(actual.len());
                if exp == ExperimentKind::Rub {
                    let misuses: BTreeSet<&str> = result
                        .runs
                        .iter()
                        .filter(|r| r.detector_id == det)
                        .filter_map(|r| r.misuse.as_deref())
                        .collect();
                    s.known_misuses = Some(misuses.len());
                    s.empirical_rub = Ratio::new(actual.len() as u64, misuses.len() as u64).ok().map(Into::into);
                    if let Some(matrix) = &ctx.matrix {
                        let labels: Vec<&BTreeSet<MucLabel>> =
                            misuses.iter().filter_map(|m| ctx.misuse_labels.get(*m)).collect();
                        let row = det
                            .parse::<crate::detect::DetectorKind>()
                            .map(|k| k.capability_row())
                            .unwrap_or(det);
                        if labels.len() == misuses.len() {
                            s.conceptual_rub = conceptual_rub(matrix, row, &labels).ok().map(Into::into);
                        }
                    }
                } else {
                    let known = ctx.known_misuses.unwrap_or(ctx.misuse_labels.len());
                    s.known_misuses = Some(known);
                    s.recall = Ratio::new(actual.len() as u64, known as u64).ok().map(Into::into);
                }
            }
        }
        out.push(s);
    }
    out
}

fn opt_ratio(r: &Option<RatioView>) -> String {
    r.as_ref().map(|r| r.display.clone()).unwrap_or_default()
}

fn opt_kappa(k: Option<f64>) -> String {
    k.map(|k| format!("{k:.2}")).unwrap_or_default()
}

/// Summary table in CSV, one row per detector.
pub fn summary_csv(experiment: ExperimentKind, stats: &[DetectorStats]) -> String {
    let mut out = String::new();
    match experiment {
        ExperimentKind::P => {
            out.push_str("detector,reviewed,confirmed,precision,kappa");
            for c in FpRootCause::ALL {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
            for s in stats {
                out.push_str(&format!(
                    "{},{},{},{},{}",
                    s.detector_id,
                    s.reviewed,
                    s.confirmed,
                    opt_ratio(&s.precision),
                    opt_kappa(s.kappa)
                ));
                for c in FpRootCause::ALL {
                    out.push_str(&format!(",{}", s.fp_root_causes.get(&c.to_string()).unwrap_or(&0)));
                }
                out.push('\n');
            }
        }
        ExperimentKind::Rub => {
            out.push_str("detector,misuses,potential_hits,actual_hits,empirical_rub,conceptual_rub,kappa");
            for c in FnRootCause::ALL {
                out.push_str(&format!(",{c}"));
            }
            out.push('\n');
            for s in stats {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}",
                    s.detector_id,
                    s.known_misuses.unwrap_or(0),
                    s.potential_hits.unwrap_or(0),
                    s.actual_hits.unwrap_or(0),
                    opt_ratio(&s.empirical_rub),
                    opt_ratio(&s.conceptual_rub),
                    opt_kappa(s.kappa)
                ));
                for c in FnRootCause::ALL {
                    out.push_str(&format!(",{}", s.fn_root_causes.get(&c.to_string()).unwrap_or(&0)));
                }
                out.push('\n');
            }
        }
        ExperimentKind::R => {
            out.push_str("detector,known_misuses,potential_hits,actual_hits,recall,kappa\n");
            for s in stats {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    s.detector_id,
                    s.known_misuses.unwrap_or(0),
                    s.potential_hits.unwrap_or(0),
                    s.actual_hits.unwrap_or(0),
                    opt_ratio(&s.recall),
                    opt_kappa(s.kappa)
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::experiment::{FindingRecord, HitRecord, RunRecord};
    use crate::model::{Score, SourceLocation};

    fn finding(id: &str, det: &str) -> FindingRecord {
        FindingRecord {
            id: id.into(),
            experiment: ExperimentKind::P,
            detector_id: det.into(),
            project: "p".into(),
            version: "v".into(),
            misuse: None,
            rank: 1,
            score: Score::Finite(1.0),
            location: SourceLocation::new("p", "v", "A.java", "m", Some(3)).unwrap(),
            missing: BTreeSet::new(),
            present: BTreeSet::new(),
            redundant: BTreeSet::new(),
            pattern: BTreeSet::new(),
            pattern_support: 20,
            metadata: BTreeMap::new(),
        }
    }

    fn result(exp: ExperimentKind, ids: &[&str]) -> ExperimentResult {
        ExperimentResult {
            experiment: exp,
            runs: vec![],
            findings: ids.iter().map(|i| finding(i, "call-set")).collect(),
            hits: vec![],
        }
    }

    fn a(f: &str, who: &str, d: Decision, t: u64) -> Assessment {
        Assessment {
            finding_id: f.into(),
            reviewer: who.into(),
            decision: d,
            fp_root_cause: None,
            fn_root_cause: None,
            comment: String::new(),
            timestamp: t,
        }
    }

    fn store() -> (tempfile::TempDir, ReviewStore) {
        let dir = tempfile::tempdir().unwrap();
        let s = ReviewStore::open(&dir.path().join("review/store.jsonl")).unwrap();
        (dir, s)
    }

    use Decision::*;

    #[test]
    fn two_agreeing_assessments_confirm() {
        let (_d, mut s) = store();
        let r = result(ExperimentKind::P, &["f1"]);
        s.assess(ExperimentKind::P, a("f1", "alice", Misuse, 1)).unwrap();
        let st = experiment_stats(&r, &s, &StatsContext::default());
        assert_eq!(st[0].reviewed, 0);
        assert_eq!(st[0].completeness, Completeness { complete: 0, total: 1 });
        assert!(st[0].precision.is_none());
        assert_eq!(s.state("f1").progress(), "1/2");
        s.assess(ExperimentKind::P, a("f1", "bob", Misuse, 2)).unwrap();
        let st = experiment_stats(&r, &s, &StatsContext::default());
        assert_eq!((st[0].reviewed, st[0].confirmed), (1, 1));
        assert_eq!(st[0].precision.as_ref().unwrap().display, "100.0%");
    }

    #[test]
    fn resolution_overrides_but_kappa_uses_first_round() {
        let (_d, mut s) = store();
        let r = result(ExperimentKind::P, &["f1", "f2"]);
        s.assess(ExperimentKind::P, a("f1", "alice", Misuse, 1)).unwrap();
        let early = Resolution {
            finding_id: "f1".into(),
            reviewer: "alice".into(),
            decision: Misuse,
            note: String::new(),
            timestamp: 2,
        };
        assert!(matches!(s.resolve(early.clone()), Err(ReviewError::PrematureResolution { have: 1, .. })));
        s.assess(ExperimentKind::P, a("f1", "bob", NotMisuse, 3)).unwrap();
        s.assess(ExperimentKind::P, a("f2", "alice", NotMisuse, 4)).unwrap();
        s.assess(ExperimentKind::P, a("f2", "bob", NotMisuse, 5)).unwrap();
        let st = &experiment_stats(&r, &s, &StatsContext::default())[0];
        assert_eq!((st.reviewed, st.unresolved), (1, 1));
        s.resolve(early).unwrap();
        let st = &experiment_stats(&r, &s, &StatsContext::default())[0];
        assert_eq!((st.reviewed, st.confirmed), (2, 1));
        let expected = cohens_kappa(&[(true, false), (false, false)]).unwrap();
        assert_eq!(st.kappa, Some(expected));
    }

    #[test]
    fn root_cause_must_fit_decision() {
        let (_d, mut s) = store();
        let mut x = a("f1", "alice", Misuse, 1);
        x.fp_root_cause = Some(FpRootCause::Uncommon);
        assert!(matches!(s.assess(ExperimentKind::P, x.clone()), Err(ReviewError::InvalidRootCause(_))));
        x.decision = NotMisuse;
        s.assess(ExperimentKind::P, x.clone()).unwrap();
        assert!(s.assess(ExperimentKind::R, x).is_err());
        let mut y = a("f1", "bob", NotMisuse, 1);
        y.fn_root_cause = Some(FnRootCause::Matching);
        assert!(s.assess(ExperimentKind::P, y.clone()).is_err());
        s.assess(ExperimentKind::Rub, y).unwrap();
    }

    #[test]
    fn restart_and_compaction_keep_everything() {
        let (dir, mut s) = store();
        for t in 0..50 {
            s.assess(ExperimentKind::P, a("f1", "alice", if t % 2 == 0 { Misuse } else { NotMisuse }, t)).unwrap();
            s.assess(ExperimentKind::P, a("f1", "bob", Misuse, t)).unwrap();
        }
        let path = dir.path().join("review/store.jsonl");
        let reopened = ReviewStore::open(&path).unwrap();
        assert_eq!(reopened.state("f1"), s.state("f1"));
        assert_eq!(reopened.state("f1").assessments[0].decision, NotMisuse);
        assert!(s.maybe_compact().unwrap());
        assert_eq!(s.log_records(), 2);
        let reopened = ReviewStore::open(&path).unwrap();
        assert_eq!(reopened.state("f1"), s.state("f1"));
    }

    #[test]
    fn stale_write_does_not_win() {
        let (_d, mut s) = store();
        s.assess(ExperimentKind::P, a("f1", "alice", Misuse, 10)).unwrap();
        s.assess(ExperimentKind::P, a("f1", "alice", NotMisuse, 5)).unwrap();
        assert_eq!(s.state("f1").assessments[0].decision, Misuse);
    }

    #[test]
    fn planted_precision() {
        let (_d, mut s) = store();
        let ids: Vec<String> = (1..=20).map(|i| format!("f{i:02}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let r = result(ExperimentKind::P, &refs);
        for (i, id) in ids.iter().enumerate() {
            let d = if i < 3 { Misuse } else { NotMisuse };
            for who in ["alice", "bob"] {
                let mut x = a(id, who, d, 1);
                if d == NotMisuse {
                    x.fp_root_cause = Some(FpRootCause::Inside);
                }
                s.assess(ExperimentKind::P, x).unwrap();
            }
        }
        let st = &experiment_stats(&r, &s, &StatsContext::default())[0];
        assert_eq!(st.precision.as_ref().unwrap().display, "15.0%");
        assert_eq!(st.fp_root_causes["Inside"], 17);
        assert_eq!(st.kappa, Some(1.0));
        let csv = summary_csv(ExperimentKind::P, &experiment_stats(&r, &s, &StatsContext::default()));
        assert_eq!(
            csv,
            "detector,reviewed,confirmed,precision,kappa,Uncommon,Analysis,Alternative,Inside,Dependent,Bug,Multiplicity\n\
             call-set,20,3,15.0%,1.00,0,0,0,17,0,0,0\n"
        );
    }

    #[test]
    fn rub_counts_misuses_not_findings() {
        let (_d, mut s) = store();
        let mut r = result(ExperimentKind::Rub, &["h1", "h2"]);
        for m in ["m1", "m2", "m3"] {
            r.runs.push(RunRecord {
                experiment: ExperimentKind::Rub,
                detector_id: "call-set".into(),
                project: "p".into(),
                version: "v".into(),
                misuse: Some(m.into()),
                status: "completed".into(),
                message: None,
                total_findings: 1,
                exported_findings: 1,
            });
        }
        for (f, m) in [("h1", "m1"), ("h2", "m2")] {
            r.hits.push(HitRecord {
                experiment: ExperimentKind::Rub,
                detector_id: "call-set".into(),
                finding_id: f.into(),
                misuse_id: m.into(),
                ambiguous: false,
            });
        }
        for who in ["alice", "bob"] {
            s.assess(ExperimentKind::Rub, a("h1", who, Misuse, 1)).unwrap();
            s.assess(ExperimentKind::Rub, a("h2", who, NotMisuse, 1)).unwrap();
        }
        let label: MucLabel = "missing/method-call".parse().unwrap();
        let ctx = StatsContext {
            misuse_labels: ["m1", "m2", "m3"].iter().map(|m| (m.to_string(), BTreeSet::from([label]))).collect(),
            matrix: Some(CapabilityMatrix::surveyed()),
            ..Default::default()
        };
        let st = &experiment_stats(&r, &s, &ctx)[0];
        assert_eq!((st.potential_hits, st.actual_hits, st.known_misuses), (Some(2), Some(1), Some(3)));
        assert_eq!(st.empirical_rub.as_ref().unwrap().display, "33.3%");
        assert_eq!(st.conceptual_rub.as_ref().unwrap().display, "100.0%");
    }

    #[test]
    fn vocabulary_strings() {
        assert_eq!(NotMisuse.to_string(), "not-misuse");
        assert_eq!(FnRootCause::ExceptionHandling.to_string(), "ExceptionHandling");
        assert_eq!("misuse".parse::<Decision>().unwrap(), Misuse);
    }
}
