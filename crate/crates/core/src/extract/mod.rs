//! Source extraction: Java files to usage models, plus the facts file.

pub mod facts_file;
pub mod java;
pub mod paths;
pub mod project;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

pub use facts_file::{load_facts_file, write_facts_file};
pub use java::{parse_method_models, ParsedFile};
pub use project::{
    called_objects, to_call_pairs, to_call_set, to_temporal_facts, to_type_usages, CallPairFacts,
    CallSet, TemporalFact, TypeUsage,
};

use crate::model::{MethodUsageModel, ModelError};
use crate::par::Execution;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("{file}:{line}:{column}: syntax error")]
    Parse { file: String, line: usize, column: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("facts file line {line}: {message}")]
    Facts { line: usize, message: String },
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("parser setup failed: {0}")]
    ParserSetup(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl ExtractError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ExtractError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractWarning {
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    pub message: String,
}

/// Extraction output for a whole source tree.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub models: Vec<MethodUsageModel>,
    pub warnings: Vec<ExtractWarning>,
    pub supertypes: BTreeMap<String, BTreeSet<String>>,
}

/// Relative paths of all `.java` files under the given roots, sorted.
pub fn java_files(base: &Path, roots: &[String]) -> Result<Vec<String>, ExtractError> {
    let mut files = BTreeSet::new();
    for root in roots {
        let dir = base.join(root);
        for entry in WalkDir::new(&dir).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                let err = std::io::Error::other(e.to_string());
                ExtractError::io(&dir, err)
            })?;
            if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "java") {
                let rel = entry.path().strip_prefix(base).unwrap_or(entry.path());
                files.insert(crate::model::normalize_path(&rel.to_string_lossy())?);
            }
        }
    }
    Ok(files.into_iter().collect())
}

/// Extracts every Java file under `roots`. Files that fail to parse are
/// skipped and reported as warnings; results are ordered by file path,
/// then by method position.
pub fn extract_tree(
    base: &Path,
    roots: &[String],
    project_id: &str,
    version_id: &str,
    exec: Execution,
) -> Result<Extraction, ExtractError> {
    let files = java_files(base, roots)?;
    let results = exec.map(&files, |rel| {
        let path = base.join(rel);
        let text = std::fs::read_to_string(&path).map_err(|e| ExtractError::io(&path, e))?;
        parse_method_models(&text, rel, project_id, version_id)
    });
    let mut out = Extraction::default();
    for (rel, res) in files.iter().zip(results) {
        match res {
            Ok(parsed) => {
                out.models.extend(parsed.models);
                out.warnings.extend(parsed.warnings);
                for (k, v) in parsed.supertypes {
                    out.supertypes.entry(k).or_default().extend(v);
                }
            }
            Err(e @ ExtractError::Parse { .. }) => out.warnings.push(ExtractWarning {
                file: rel.clone(),
                line: None,
                message: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_extraction_is_ordered_and_tolerant() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src/b");
        std::fs::create_dir_all(&src).unwrap();
        std::fs::write(dir.path().join("src/Z.java"), "class Z { void z() { a.b(); } }").unwrap();
        std::fs::write(src.join("A.java"), "class A { void a() {} void b() {} }").unwrap();
        std::fs::write(src.join("Bad.java"), "class {").unwrap();
        let seq = extract_tree(dir.path(), &["src".into()], "p", "v", Execution::Sequential).unwrap();
        let par = extract_tree(dir.path(), &["src".into()], "p", "v", Execution::Parallel).unwrap();
        assert_eq!(seq, par);
        let names: Vec<_> = seq
            .models
            .iter()
            .map(|m| format!("{}#{}", m.location.file_path, m.location.method_name))
            .collect();
        assert_eq!(names, vec!["src/Z.java#z", "src/b/A.java#a", "src/b/A.java#b"]);
        assert_eq!(seq.warnings.len(), 1);
        assert_eq!(seq.warnings[0].file, "src/b/Bad.java");
    }
}
