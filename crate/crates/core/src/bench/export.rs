//! Newline-delimited result files under `results/<experiment>/`.

use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use super::experiment::{ExperimentKind, ExperimentResult, FindingRecord, HitRecord, RunRecord};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Record { path: PathBuf, line: usize, message: String },
}

fn io(path: &Path, source: std::io::Error) -> ExportError {
    ExportError::Io {
        path: path.to_owned(),
        source,
    }
}

pub fn results_dir(workspace: &Path, exp: ExperimentKind) -> PathBuf {
    workspace.join("results").join(exp.as_str())
}

/// Writes records one JSON object per line, replacing the file atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), ExportError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    }
    let tmp = path.with_extension("jsonl.tmp");
    let file = std::fs::File::create(&tmp).map_err(|e| io(&tmp, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| ExportError::Record {
            path: path.to_owned(),
            line: 0,
            message: e.to_string(),
        })?;
        writeln!(w, "{line}").map_err(|e| io(&tmp, e))?;
    }
    w.flush().map_err(|e| io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ExportError> {
    let file = std::fs::File::open(path).map_err(|e| io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ExportError::Record {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_result(dir: &Path, result: &ExperimentResult) -> Result<(), ExportError> {
    write_jsonl(&dir.join("runs.jsonl"), &result.runs)?;
    write_jsonl(&dir.join("findings.jsonl"), &result.findings)?;
    write_jsonl(&dir.join("hits.jsonl"), &result.hits)
}

pub fn read_result(dir: &Path, experiment: ExperimentKind) -> Result<ExperimentResult, ExportError> {
    let runs: Vec<RunRecord> = read_jsonl(&dir.join("runs.jsonl"))?;
    let findings: Vec<FindingRecord> = read_jsonl(&dir.join("findings.jsonl"))?;
    let hits: Vec<HitRecord> = read_jsonl(&dir.join("hits.jsonl"))?;
    Ok(ExperimentResult {
        experiment,
        runs,
        findings,
        hits,
    })
}
