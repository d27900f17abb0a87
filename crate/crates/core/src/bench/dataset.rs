//! Dataset layout: `index.yml` lists project versions; `misuses/*.yml`
//! holds one known misuse per file.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{normalize_path, MucLabel, SourceLocation};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{file}: {message}")]
    Syntax { file: String, message: String },
    #[error("{file}: missing required field `{field}`")]
    MissingField { file: String, field: &'static str },
    #[error("{file}: invalid field `{field}`: {message}")]
    InvalidField {
        file: String,
        field: &'static str,
        message: String,
    },
    #[error("duplicate {what} `{id}`")]
    Duplicate { what: &'static str, id: String },
    #[error("unknown misuse `{0}`")]
    UnknownMisuse(String),
    #[error("unknown version `{0}`")]
    UnknownVersion(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Local(String),
    Git { url: String, commit: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectVersion {
    pub project: String,
    pub version: String,
    #[serde(with = "serde_yaml::with::singleton_map")]
    pub origin: Origin,
    pub source_roots: Vec<String>,
    /// Versions that only host micro-benchmark misuses; not part of the
    /// per-project experiments.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub handcrafted: bool,
}

impl ProjectVersion {
    pub fn key(&self) -> String {
        format!("{}/{}", self.project, self.version)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnownMisuse {
    pub id: String,
    pub location: SourceLocation,
    pub description: String,
    pub muc_labels: BTreeSet<MucLabel>,
    pub fix_description: String,
    /// Dataset-relative path of the crafted correct usage.
    pub crafted_usage: Option<String>,
}

impl KnownMisuse {
    pub fn version_key(&self) -> String {
        format!("{}/{}", self.location.project_id, self.location.version_id)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIndex {
    versions: Vec<RawVersion>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVersion {
    project: Option<String>,
    version: Option<String>,
    #[serde(default, with = "serde_yaml::with::singleton_map")]
    origin: Option<Origin>,
    source_roots: Option<Vec<String>>,
    #[serde(default)]
    handcrafted: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMisuse {
    id: Option<String>,
    project: Option<String>,
    version: Option<String>,
    file: Option<String>,
    method: Option<String>,
    line: Option<u32>,
    description: Option<String>,
    muc_labels: Option<Vec<String>>,
    fix_description: Option<String>,
    crafted_usage: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub versions: Vec<ProjectVersion>,
    pub misuses: Vec<KnownMisuse>,
}

fn is_full_hash(commit: &str) -> bool {
    commit.len() == 40 && commit.chars().all(|c| c.is_ascii_hexdigit())
}

fn need<T>(v: Option<T>, file: &str, field: &'static str) -> Result<T, DatasetError> {
    v.ok_or_else(|| DatasetError::MissingField {
        file: file.to_owned(),
        field,
    })
}

fn parse_version(raw: RawVersion, file: &str) -> Result<ProjectVersion, DatasetError> {
    let origin = need(raw.origin, file, "origin")?;
    if let Origin::Git { commit, .. } = &origin {
        if !is_full_hash(commit) {
            return Err(DatasetError::InvalidField {
                file: file.to_owned(),
                field: "origin",
                message: format!("commit `{commit}` is not a full 40-character hash"),
            });
        }
    }
    let source_roots = need(raw.source_roots, file, "source_roots")?;
    if source_roots.is_empty() {
        return Err(DatasetError::InvalidField {
            file: file.to_owned(),
            field: "source_roots",
            message: "at least one source root is required".into(),
        });
    }
    let source_roots = source_roots
        .iter()
        .map(|r| {
            if r == "." {
                return Ok(".".to_owned());
            }
            normalize_path(r).map_err(|e| DatasetError::InvalidField {
                file: file.to_owned(),
                field: "source_roots",
                message: e.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(ProjectVersion {
        project: need(raw.project, file, "project")?,
        version: need(raw.version, file, "version")?,
        origin,
        source_roots,
        handcrafted: raw.handcrafted,
    })
}

/// Parses one misuse record; `file` names the source in errors.
pub fn parse_misuse(text: &str, file: &str) -> Result<KnownMisuse, DatasetError> {
    let raw: RawMisuse = serde_yaml::from_str(text).map_err(|e| DatasetError::Syntax {
        file: file.to_owned(),
        message: e.to_string(),
    })?;
    let id = need(raw.id, file, "id")?;
    let project = need(raw.project, file, "project")?;
    let version = need(raw.version, file, "version")?;
    let path = need(raw.file, file, "file")?;
    let method = need(raw.method, file, "method")?;
    let description = need(raw.description, file, "description")?;
    let labels = need(raw.muc_labels, file, "muc_labels")?;
    let fix_description = need(raw.fix_description, file, "fix_description")?;
    if labels.is_empty() {
        return Err(DatasetError::InvalidField {
            file: file.to_owned(),
            field: "muc_labels",
            message: "at least one label is required".into(),
        });
    }
    let muc_labels = labels
        .iter()
        .map(|l| l.parse::<MucLabel>())
        .collect::<Result<BTreeSet<_>, _>>()
        .map_err(|e| DatasetError::InvalidField {
            file: file.to_owned(),
            field: "muc_labels",
            message: e.to_string(),
        })?;
    let location = SourceLocation::new(project, version, &path, method, raw.line).map_err(|e| {
        DatasetError::InvalidField {
            file: file.to_owned(),
            field: "file",
            message: e.to_string(),
        }
    })?;
    let crafted_usage = raw
        .crafted_usage
        .map(|p| {
            normalize_path(&p).map_err(|e| DatasetError::InvalidField {
                file: file.to_owned(),
                field: "crafted_usage",
                message: e.to_string(),
            })
        })
        .transpose()?;
    Ok(KnownMisuse {
        id,
        location,
        description,
        muc_labels,
        fix_description,
        crafted_usage,
    })
}

fn read(path: &Path) -> Result<String, DatasetError> {
    std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

impl Dataset {
    /// Loads and validates a dataset directory.
    pub fn load(root: &Path) -> Result<Self, DatasetError> {
        let index_path = root.join("index.yml");
        let raw: RawIndex = serde_yaml::from_str(&read(&index_path)?).map_err(|e| DatasetError::Syntax {
            file: "index.yml".into(),
            message: e.to_string(),
        })?;
        let mut versions = Vec::new();
        let mut keys = BTreeSet::new();
        for rv in raw.versions {
            let v = parse_version(rv, "index.yml")?;
            if !keys.insert(v.key()) {
                return Err(DatasetError::Duplicate {
                    what: "version",
                    id: v.key(),
                });
            }
            versions.push(v);
        }

        let mut misuses = Vec::new();
        let dir = root.join("misuses");
        let mut files: Vec<PathBuf> = match std::fs::read_dir(&dir) {
            Ok(rd) => rd
                .filter_map(Result::ok)
                .map(|e| e.path())
                .filter(|p| matches!(p.extension().and_then(|x| x.to_str()), Some("yml" | "yaml")))
                .collect(),
            Err(_) => Vec::new(),
        };
        files.sort();
        let mut ids = BTreeSet::new();
        for f in files {
            let name = format!("misuses/{}", f.file_name().unwrap_or_default().to_string_lossy());
            let m = parse_misuse(&read(&f)?, &name)?;
            if !keys.contains(&m.version_key()) {
                return Err(DatasetError::InvalidField {
                    file: name,
                    field: "version",
                    message: format!("version `{}` is not listed in index.yml", m.version_key()),
                });
            }
            if let Some(c) = &m.crafted_usage {
                if !root.join(c).is_file() {
                    return Err(DatasetError::InvalidField {
                        file: name,
                        field: "crafted_usage",
                        message: format!("`{c}` does not exist"),
                    });
                }
            }
            if !ids.insert(m.id.clone()) {
                return Err(DatasetError::Duplicate {
                    what: "misuse",
                    id: m.id,
                });
            }
            misuses.push(m);
        }
        misuses.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Self {
            root: root.to_owned(),
            versions,
            misuses,
        })
    }

    pub fn version(&self, key: &str) -> Result<&ProjectVersion, DatasetError> {
        self.versions
            .iter()
            .find(|v| v.key() == key || v.version == key)
            .ok_or_else(|| DatasetError::UnknownVersion(key.to_owned()))
    }

    pub fn misuse(&self, id: &str) -> Result<&KnownMisuse, DatasetError> {
        self.misuses
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| DatasetError::UnknownMisuse(id.to_owned()))
    }

    pub fn misuses_of<'a>(&'a self, v: &ProjectVersion) -> impl Iterator<Item = &'a KnownMisuse> + 'a {
        let key = v.key();
        self.misuses.iter().filter(move |m| m.version_key() == key)
    }

    /// Versions used by the per-project experiments.
    pub fn project_versions(&self) -> impl Iterator<Item = &ProjectVersion> {
        self.versions.iter().filter(|v| !v.handcrafted)
    }

    pub fn labels_by_id(&self) -> BTreeMap<&str, &BTreeSet<MucLabel>> {
        self.misuses.iter().map(|m| (m.id.as_str(), &m.muc_labels)).collect()
    }
}
