//! Usage facts shared by extraction, detection and benchmarking.
//!
//! A [`MethodUsageModel`] is the per-method extraction result: the objects
//! tracked in a method body, the ordered call and control events, and the
//! call order that holds on exceptional paths. Everything downstream (the
//! detectors' usage encodings, potential-hit matching, review) is derived
//! from these values.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("method signature has an empty name")]
    EmptyMethodName,
    #[error("path `{0}` must be relative and must not contain `..`")]
    InvalidPath(String),
    #[error("label set at index {index} is empty")]
    EmptyLabelSet { index: usize },
    #[error("unknown MUC label `{0}`")]
    UnknownLabel(String),
    #[error("unknown capability level `{0}`")]
    UnknownCapability(String),
    #[error("unknown detector `{0}` in capability matrix")]
    UnknownDetector(String),
    #[error("capability row for `{detector}` is missing cell {label}")]
    IncompleteRow { detector: String, label: MucLabel },
    #[error("capability file: {0}")]
    CapabilityFile(String),
    #[error("event {index}: object `{object}` is not declared in the model")]
    UndeclaredObject { index: usize, object: String },
    #[error("exceptional successor ({from}, {to}) is out of range or not increasing")]
    BadSuccessor { from: usize, to: usize },
    #[error("event {index}: unbalanced control structure ({detail})")]
    Unbalanced { index: usize, detail: &'static str },
}

/// Granularity at which two method signatures are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignatureMode {
    NameOnly,
    NameAndArity,
    #[default]
    Full,
}

impl FromStr for SignatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "name-only" => Ok(Self::NameOnly),
            "name-and-arity" => Ok(Self::NameAndArity),
            "full" => Ok(Self::Full),
            other => Err(format!(
                "unknown signature mode `{other}` (expected name-only, name-and-arity, full)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MethodSignature {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declaring_type: Option<String>,
    pub name: String,
    pub param_count: u32,
}

impl MethodSignature {
    pub fn new(
        declaring_type: Option<&str>,
        name: impl Into<String>,
        param_count: u32,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        if name.is_empty() {
            return Err(ModelError::EmptyMethodName);
        }
        Ok(Self {
            declaring_type: declaring_type.map(str::to_owned),
            name,
            param_count,
        })
    }

    /// Shorthand for tests and fixtures; panics on an empty name.
    pub fn of(declaring_type: Option<&str>, name: &str, param_count: u32) -> Self {
        Self::new(declaring_type, name, param_count).expect("non-empty method name")
    }

    /// Stable textual encoding at the given granularity, used as a fact token.
    pub fn render(&self, mode: SignatureMode) -> String {
        match mode {
            SignatureMode::NameOnly => self.name.clone(),
            SignatureMode::NameAndArity => format!("{}/{}", self.name, self.param_count),
            SignatureMode::Full => match &self.declaring_type {
                Some(ty) => format!("{ty}.{}/{}", self.name, self.param_count),
                None => format!("{}/{}", self.name, self.param_count),
            },
        }
    }
}

impl fmt::Display for MethodSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(SignatureMode::Full))
    }
}

/// Equality at the requested granularity. `Full` falls back to
/// `NameAndArity` when either declaring type is unknown.
pub fn signatures_equal(a: &MethodSignature, b: &MethodSignature, mode: SignatureMode) -> bool {
    match mode {
        SignatureMode::NameOnly => a.name == b.name,
        SignatureMode::NameAndArity => a.name == b.name && a.param_count == b.param_count,
        SignatureMode::Full => {
            let arity_eq = a.name == b.name && a.param_count == b.param_count;
            match (&a.declaring_type, &b.declaring_type) {
                (Some(x), Some(y)) => arity_eq && x == y,
                _ => arity_eq,
            }
        }
    }
}

/// Normalizes a corpus-relative path: forward slashes, no `.` segments.
/// Absolute paths and `..` segments are rejected.
pub fn normalize_path(path: &str) -> Result<String, ModelError> {
    let unified = path.replace('\\', "/");
    if unified.starts_with('/') || unified.chars().nth(1) == Some(':') {
        return Err(ModelError::InvalidPath(path.to_owned()));
    }
    let mut parts = Vec::new();
    for seg in unified.split('/') {
        match seg {
            "" | "." => continue,
            ".." => return Err(ModelError::InvalidPath(path.to_owned())),
            s => parts.push(s),
        }
    }
    if parts.is_empty() {
        return Err(ModelError::InvalidPath(path.to_owned()));
    }
    Ok(parts.join("/"))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceLocation {
    pub project_id: String,
    pub version_id: String,
    pub file_path: String,
    pub method_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
}

impl SourceLocation {
    pub fn new(
        project_id: impl Into<String>,
        version_id: impl Into<String>,
        file_path: &str,
        method_name: impl Into<String>,
        line: Option<u32>,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            project_id: project_id.into(),
            version_id: version_id.into(),
            file_path: normalize_path(file_path)?,
            method_name: method_name.into(),
            line: line.filter(|l| *l > 0),
        })
    }

    /// Ordering key used by every ranking tie-break: file, method, line.
    pub fn sort_key(&self) -> (&str, &str, u32) {
        (&self.file_path, &self.method_name, self.line.unwrap_or(0))
    }
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.file_path, self.method_name)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        Ok(())
    }
}

/// One entry of a method's event stream.
///
/// Control structures are bracketed: `BranchEnter (arm BranchElse)* BranchExit`,
/// `LoopEnter header LoopBody body LoopExit`, and
/// `TryEnter body (CatchEnter handler)* (FinallyEnter block)? TryExit`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UsageEvent {
    Call { object: String, method: MethodSignature },
    NullCheck { object: String },
    ValueCheck { object: String, method: MethodSignature },
    BranchEnter,
    BranchElse,
    BranchExit,
    LoopEnter,
    LoopBody,
    LoopExit,
    TryEnter,
    CatchEnter { exception_type: String },
    FinallyEnter,
    TryExit,
}

impl UsageEvent {
    pub fn object(&self) -> Option<&str> {
        match self {
            Self::Call { object, .. } | Self::NullCheck { object } | Self::ValueCheck { object, .. } => {
                Some(object)
            }
            _ => None,
        }
    }

    pub fn call_on(&self, obj: &str) -> Option<&MethodSignature> {
        match self {
            Self::Call { object, method } if object == obj => Some(method),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrackedObject {
    pub name: String,
    /// Declared static type; `None` when it cannot be resolved locally.
    #[serde(rename = "type")]
    pub static_type: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodUsageModel {
    pub location: SourceLocation,
    pub objects: Vec<TrackedObject>,
    pub events: Vec<UsageEvent>,
    /// `(i, j)`: event `j` follows event `i` when `i` throws.
    pub exceptional_successors: BTreeSet<(usize, usize)>,
}

impl MethodUsageModel {
    pub fn empty(location: SourceLocation) -> Self {
        Self {
            location,
            objects: Vec::new(),
            events: Vec::new(),
            exceptional_successors: BTreeSet::new(),
        }
    }

    pub fn object(&self, name: &str) -> Option<&TrackedObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    pub fn calls(&self) -> impl Iterator<Item = (usize, &str, &MethodSignature)> {
        self.events.iter().enumerate().filter_map(|(i, e)| match e {
            UsageEvent::Call { object, method } => Some((i, object.as_str(), method)),
            _ => None,
        })
    }

    /// Checks the structural invariants: declared objects, in-range
    /// increasing successor pairs and balanced control brackets.
    pub fn validate(&self) -> Result<(), ModelError> {
        let declared: BTreeSet<&str> = self.objects.iter().map(|o| o.name.as_str()).collect();
        for (index, ev) in self.events.iter().enumerate() {
            if let Some(obj) = ev.object() {
                if !declared.contains(obj) {
                    return Err(ModelError::UndeclaredObject {
                        index,
                        object: obj.to_owned(),
                    });
                }
            }
        }
        for &(from, to) in &self.exceptional_successors {
            if from >= to || to >= self.events.len() {
                return Err(ModelError::BadSuccessor { from, to });
            }
        }
        crate::extract::paths::ControlTree::build(&self.events).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MucKind {
    Missing,
    Redundant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MucElement {
    MethodCall,
    NullCheckCondition,
    ValueOrStateCondition,
    SynchronizationCondition,
    ContextCondition,
    Iteration,
    ExceptionHandling,
}

impl MucKind {
    pub const ALL: [MucKind; 2] = [MucKind::Missing, MucKind::Redundant];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Missing => "missing",
            Self::Redundant => "redundant",
        }
    }
}

impl MucElement {
    pub const ALL: [MucElement; 7] = [
        MucElement::MethodCall,
        MucElement::NullCheckCondition,
        MucElement::ValueOrStateCondition,
        MucElement::SynchronizationCondition,
        MucElement::ContextCondition,
        MucElement::Iteration,
        MucElement::ExceptionHandling,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MethodCall => "method-call",
            Self::NullCheckCondition => "null-check",
            Self::ValueOrStateCondition => "value-or-state",
            Self::SynchronizationCondition => "synchronization",
            Self::ContextCondition => "context",
            Self::Iteration => "iteration",
            Self::ExceptionHandling => "exception-handling",
        }
    }
}

/// A (violation kind, usage element) cell of the misuse classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MucLabel {
    pub kind: MucKind,
    pub element: MucElement,
}

impl MucLabel {
    pub const fn new(kind: MucKind, element: MucElement) -> Self {
        Self { kind, element }
    }

    /// All 14 cells, kind-major.
    pub fn all() -> impl Iterator<Item = MucLabel> {
        MucKind::ALL
            .into_iter()
            .flat_map(|k| MucElement::ALL.into_iter().map(move |e| MucLabel::new(k, e)))
    }
}

impl fmt::Display for MucLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.kind.as_str(), self.element.as_str())
    }
}

impl FromStr for MucLabel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MucLabel::all()
            .find(|l| l.to_string() == s.trim())
            .ok_or_else(|| ModelError::UnknownLabel(s.to_owned()))
    }
}

impl Serialize for MucLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MucLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-cell counts over a list of misuse label sets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MucHistogram {
    counts: BTreeMap<MucLabel, usize>,
}

impl MucHistogram {
    pub fn get(&self, label: MucLabel) -> usize {
        self.counts.get(&label).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MucLabel, usize)> + '_ {
        MucLabel::all().map(move |l| (l, self.get(l)))
    }
}

pub fn muc_histogram(labels: &[BTreeSet<MucLabel>]) -> Result<MucHistogram, ModelError> {
    let mut counts = BTreeMap::new();
    for (index, set) in labels.iter().enumerate() {
        if set.is_empty() {
            return Err(ModelError::EmptyLabelSet { index });
        }
        for label in set {
            *counts.entry(*label).or_insert(0) += 1;
        }
    }
    Ok(MucHistogram { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Capability {
    None,
    Partial,
    Full,
}

impl Capability {
    pub fn detects(self) -> bool {
        !matches!(self, Capability::None)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CapabilityRecord {
    detector: String,
    capabilities: BTreeMap<String, Capability>,
}

/// Per-detector capability levels over the 14 MUC cells.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CapabilityMatrix {
    rows: BTreeMap<String, BTreeMap<MucLabel, Capability>>,
}

const SURVEYED: &[(&str, &str)] = &[
    ("pr-miner", include_str!("../data/capabilities/pr-miner.yml")),
    ("chronicler", include_str!("../data/capabilities/chronicler.yml")),
    ("colibri", include_str!("../data/capabilities/colibri.yml")),
    ("jadet", include_str!("../data/capabilities/jadet.yml")),
    ("rgj", include_str!("../data/capabilities/rgj.yml")),
    ("alattin", include_str!("../data/capabilities/alattin.yml")),
    ("ax09", include_str!("../data/capabilities/ax09.yml")),
    ("car-miner", include_str!("../data/capabilities/car-miner.yml")),
    ("groum-miner", include_str!("../data/capabilities/groum-miner.yml")),
    ("dmmc", include_str!("../data/capabilities/dmmc.yml")),
    ("tikanga", include_str!("../data/capabilities/tikanga.yml")),
    ("droid-assist", include_str!("../data/capabilities/droid-assist.yml")),
];

impl CapabilityMatrix {
    /// The twelve surveyed detectors, including those without an
    /// implementation here, as shipped under `data/capabilities`.
    pub fn surveyed() -> Self {
        let mut matrix = Self::default();
        for (_, text) in SURVEYED {
            matrix
                .merge_yaml(text)
                .expect("bundled capability files are well-formed");
        }
        matrix
    }

    pub fn insert_row(
        &mut self,
        detector: impl Into<String>,
        cells: BTreeMap<MucLabel, Capability>,
    ) -> Result<(), ModelError> {
        let detector = detector.into();
        for label in MucLabel::all() {
            if !cells.contains_key(&label) {
                return Err(ModelError::IncompleteRow { detector, label });
            }
        }
        self.rows.insert(detector, cells);
        Ok(())
    }

    /// A row with every cell at `level`.
    pub fn uniform_row(&mut self, detector: impl Into<String>, level: Capability) {
        self.rows
            .insert(detector.into(), MucLabel::all().map(|l| (l, level)).collect());
    }

    pub fn detectors(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn capability(&self, detector: &str, label: MucLabel) -> Result<Capability, ModelError> {
        self.rows
            .get(detector)
            .map(|row| row[&label])
            .ok_or_else(|| ModelError::UnknownDetector(detector.to_owned()))
    }

    /// Parses one or more `---`-separated records and adds them.
    pub fn merge_yaml(&mut self, text: &str) -> Result<(), ModelError> {
        for doc in serde_yaml::Deserializer::from_str(text) {
            let record = CapabilityRecord::deserialize(doc)
                .map_err(|e| ModelError::CapabilityFile(e.to_string()))?;
            let mut cells = BTreeMap::new();
            for (key, level) in record.capabilities {
                cells.insert(key.parse::<MucLabel>()?, level);
            }
            self.insert_row(record.detector, cells)?;
        }
        Ok(())
    }

    /// Loads every `*.yml`/`*.yaml` file in `dir` (sorted by name).
    pub fn load_dir(dir: &std::path::Path) -> Result<Self, ModelError> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| ModelError::CapabilityFile(format!("{}: {e}", dir.display())))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| matches!(p.extension().and_then(|s| s.to_str()), Some("yml" | "yaml")))
            .collect();
        entries.sort();
        let mut matrix = Self::default();
        for path in entries {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ModelError::CapabilityFile(format!("{}: {e}", path.display())))?;
            matrix.merge_yaml(&text)?;
        }
        Ok(matrix)
    }

    pub fn row_to_yaml(&self, detector: &str) -> Result<String, ModelError> {
        let row = self
            .rows
            .get(detector)
            .ok_or_else(|| ModelError::UnknownDetector(detector.to_owned()))?;
        let record = CapabilityRecord {
            detector: detector.to_owned(),
            capabilities: row.iter().map(|(l, c)| (l.to_string(), *c)).collect(),
        };
        serde_yaml::to_string(&record).map_err(|e| ModelError::CapabilityFile(e.to_string()))
    }
}

/// True iff some label in `labels` is detectable (full or partial) by `detector`.
pub fn muc_matches(
    matrix: &CapabilityMatrix,
    detector: &str,
    labels: &BTreeSet<MucLabel>,
) -> Result<bool, ModelError> {
    let row = matrix
        .rows
        .get(detector)
        .ok_or_else(|| ModelError::UnknownDetector(detector.to_owned()))?;
    Ok(labels.iter().any(|l| row[l].detects()))
}

/// Detector confidence. Conviction is unbounded when the association
/// between present and missing facts has confidence 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    Finite(f64),
    Infinite,
}

impl Score {
    pub fn value(self) -> f64 {
        match self {
            Score::Finite(v) => v,
            Score::Infinite => f64::INFINITY,
        }
    }

    /// Total order: `Infinite` above every finite value.
    pub fn cmp_total(self, other: Score) -> std::cmp::Ordering {
        match (self, other) {
            (Score::Infinite, Score::Infinite) => std::cmp::Ordering::Equal,
            (Score::Infinite, _) => std::cmp::Ordering::Greater,
            (_, Score::Infinite) => std::cmp::Ordering::Less,
            (Score::Finite(a), Score::Finite(b)) => a.total_cmp(&b),
        }
    }
}

impl Serialize for Score {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Score::Finite(v) => s.serialize_f64(*v),
            Score::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Score {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v.is_finite() => Ok(Score::Finite(v)),
            Raw::Text(t) if t == "inf" => Ok(Score::Infinite),
            _ => Err(serde::de::Error::custom("score must be a finite number or \"inf\"")),
        }
    }
}

/// A reported violation of a mined pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub detector_id: String,
    pub location: SourceLocation,
    pub score: Score,
    pub pattern_support: usize,
    pub pattern_facts: BTreeSet<String>,
    pub present_facts: BTreeSet<String>,
    pub missing_facts: BTreeSet<String>,
    #[serde(default)]
    pub redundant_facts: BTreeSet<String>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl Finding {
    pub fn has_diff(&self) -> bool {
        !(self.missing_facts.is_empty() && self.redundant_facts.is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(s: &str) -> MucLabel {
        s.parse().unwrap()
    }

    fn set(items: &[&str]) -> BTreeSet<MucLabel> {
        items.iter().map(|s| label(s)).collect()
    }

    #[test]
    fn grid_has_fourteen_distinct_cells() {
        let all: BTreeSet<_> = MucLabel::all().collect();
        assert_eq!(all.len(), 14);
        for l in &all {
            assert_eq!(&l.to_string().parse::<MucLabel>().unwrap(), l);
        }
    }

    #[test]
    fn histogram_of_nothing_is_all_zero() {
        let h = muc_histogram(&[]).unwrap();
        assert!(h.iter().all(|(_, n)| n == 0));
    }

    #[test]
    fn histogram_single_cell() {
        let sets = vec![set(&["missing/iteration"]); 3];
        let h = muc_histogram(&sets).unwrap();
        assert_eq!(h.get(label("missing/iteration")), 3);
        assert_eq!(h.total(), 3);
    }

    #[test]
    fn histogram_rejects_empty_set_with_index() {
        let sets = vec![set(&["missing/method-call"]), BTreeSet::new()];
        assert_eq!(muc_histogram(&sets), Err(ModelError::EmptyLabelSet { index: 1 }));
    }

    #[test]
    fn dmmc_row_matches_missing_calls_only() {
        let m = CapabilityMatrix::surveyed();
        assert!(muc_matches(&m, "dmmc", &set(&["missing/method-call"])).unwrap());
        assert!(!muc_matches(&m, "dmmc", &set(&["redundant/method-call"])).unwrap());
        assert!(!muc_matches(&m, "dmmc", &set(&["missing/null-check", "redundant/iteration"])).unwrap());
        assert!(matches!(
            muc_matches(&m, "nope", &set(&["missing/method-call"])),
            Err(ModelError::UnknownDetector(_))
        ));
    }

    #[test]
    fn surveyed_matrix_is_total_for_all_twelve() {
        let m = CapabilityMatrix::surveyed();
        assert_eq!(m.detectors().count(), 12);
        let jadet_iter = m
            .capability("jadet", label("missing/iteration"))
            .unwrap();
        assert_eq!(jadet_iter, Capability::Partial);
        // The single "redundant condition" column covers all four condition cells.
        for cell in ["redundant/null-check", "redundant/value-or-state", "redundant/synchronization", "redundant/context"] {
            assert_eq!(m.capability("groum-miner", label(cell)).unwrap(), Capability::None);
        }
        assert_eq!(
            m.capability("droid-assist", label("redundant/method-call")).unwrap(),
            Capability::Full
        );
    }

    #[test]
    fn capability_yaml_round_trip() {
        let m = CapabilityMatrix::surveyed();
        let text = m.row_to_yaml("ax09").unwrap();
        let mut back = CapabilityMatrix::default();
        back.merge_yaml(&text).unwrap();
        for l in MucLabel::all() {
            assert_eq!(back.capability("ax09", l), m.capability("ax09", l));
        }
    }

    #[test]
    fn incomplete_row_is_rejected() {
        let mut m = CapabilityMatrix::default();
        let err = m
            .merge_yaml("detector: x\ncapabilities:\n  missing/method-call: full\n")
            .unwrap_err();
        assert!(matches!(err, ModelError::IncompleteRow { .. }));
    }

    #[test]
    fn overloaded_get_bytes() {
        let with_arg = MethodSignature::of(Some("String"), "getBytes", 1);
        let without = MethodSignature::of(Some("String"), "getBytes", 0);
        assert!(signatures_equal(&with_arg, &without, SignatureMode::NameOnly));
        assert!(!signatures_equal(&with_arg, &without, SignatureMode::NameAndArity));
        assert!(signatures_equal(&with_arg, &with_arg, SignatureMode::Full));
    }

    #[test]
    fn full_mode_falls_back_when_type_unknown() {
        let typed = MethodSignature::of(Some("Writer"), "close", 0);
        let untyped = MethodSignature::of(None, "close", 0);
        let other = MethodSignature::of(Some("Reader"), "close", 0);
        assert!(signatures_equal(&typed, &untyped, SignatureMode::Full));
        assert!(!signatures_equal(&typed, &other, SignatureMode::Full));
    }

    #[test]
    fn paths_are_normalized() {
        assert_eq!(normalize_path("src\\main/./A.java").unwrap(), "src/main/A.java");
        assert!(normalize_path("/abs/A.java").is_err());
        assert!(normalize_path("src/../A.java").is_err());
    }

    #[test]
    fn infinite_score_sorts_above_finite() {
        assert!(Score::Infinite.cmp_total(Score::Finite(1e300)).is_gt());
        let json = serde_json::to_string(&Score::Infinite).unwrap();
        assert_eq!(json, "\"inf\"");
        let back: Score = serde_json::from_str(&json).unwrap();
        assert_eq!(back, Score::Infinite);
    }
}
