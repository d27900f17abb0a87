//! Materializes project versions under `<workspace>/checkouts`.

use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use walkdir::WalkDir;

use super::dataset::{Origin, ProjectVersion};

pub const MARKER: &str = ".checkout.json";

#[derive(Debug, Error)]
pub enum CheckoutError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("clone of {url} failed: {message}")]
    Clone { url: String, message: String },
    #[error("commit {commit} not found in {url}")]
    MissingCommit { url: String, commit: String },
    #[error("source root `{root}` missing in checkout of {version}")]
    MissingSourceRoot { version: String, root: String },
}

fn io(path: &Path, e: impl std::fmt::Display) -> CheckoutError {
    CheckoutError::Io {
        path: path.to_owned(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckoutInfo {
    pub origin: Origin,
    pub tree_hash: String,
}

/// SHA-256 over sorted relative paths and file contents, ignoring the
/// checkout marker and `.git`.
pub fn tree_hash(dir: &Path) -> Result<String, CheckoutError> {
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| io(dir, e))?;
        let rel = entry.path().strip_prefix(dir).unwrap_or(entry.path());
        if rel.components().next().is_some_and(|c| c.as_os_str() == ".git") || rel == Path::new(MARKER) {
            continue;
        }
        if entry.file_type().is_file() {
            files.push((rel.to_string_lossy().replace('\\', "/"), entry.path().to_owned()));
        }
    }
    files.sort();
    let mut h = Sha256::new();
    for (rel, path) in files {
        let bytes = std::fs::read(&path).map_err(|e| io(&path, e))?;
        h.update(rel.as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

fn copy_tree(from: &Path, to: &Path) -> Result<(), CheckoutError> {
    for entry in WalkDir::new(from).sort_by_file_name() {
        let entry = entry.map_err(|e| io(from, e))?;
        let rel = entry.path().strip_prefix(from).unwrap_or(entry.path());
        let target = to.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&target).map_err(|e| io(&target, e))?;
        } else if entry.file_type().is_file() {
            std::fs::copy(entry.path(), &target).map_err(|e| io(&target, e))?;
        }
    }
    Ok(())
}

fn read_marker(dir: &Path) -> Option<CheckoutInfo> {
    let text = std::fs::read_to_string(dir.join(MARKER)).ok()?;
    serde_json::from_str(&text).ok()
}

fn write_marker(dir: &Path, info: &CheckoutInfo) -> Result<(), CheckoutError> {
    let path = dir.join(MARKER);
    let text = serde_json::to_string_pretty(info).map_err(|e| io(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io(&path, e))
}

fn git(args: &[&str], cwd: Option<&Path>) -> Result<(), String> {
    let mut cmd = Command::new("git");
    if let Some(d) = cwd {
        cmd.arg("-C").arg(d);
    }
    let out = cmd.args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).trim().to_owned())
    }
}

pub fn checkout_dir(workspace: &Path, v: &ProjectVersion) -> PathBuf {
    workspace.join("checkouts").join(&v.project).join(&v.version)
}

/// Checks out `v` (local paths resolve against `dataset_root`) and returns
/// the checkout directory. Repeated calls reuse an up-to-date checkout.
pub fn checkout(dataset_root: &Path, workspace: &Path, v: &ProjectVersion) -> Result<(PathBuf, CheckoutInfo), CheckoutError> {
    let target = checkout_dir(workspace, v);
    let info = match &v.origin {
        Origin::Local(path) => {
            let source = dataset_root.join(path);
            if !source.is_dir() {
                return Err(io(&source, "local origin is not a directory"));
            }
            let hash = tree_hash(&source)?;
            let cached = read_marker(&target);
            if cached.as_ref().is_some_and(|c| c.tree_hash == hash && c.origin == v.origin)
                && tree_hash(&target)? == hash
            {
                cached.expect("checked above")
            } else {
                log::info!("checking out {} from {}", v.key(), source.display());
                if target.exists() {
                    std::fs::remove_dir_all(&target).map_err(|e| io(&target, e))?;
                }
                std::fs::create_dir_all(&target).map_err(|e| io(&target, e))?;
                copy_tree(&source, &target)?;
                let info = CheckoutInfo {
                    origin: v.origin.clone(),
                    tree_hash: hash,
                };
                write_marker(&target, &info)?;
                info
            }
        }
        Origin::Git { url, commit } => match read_marker(&target) {
            Some(c) if c.origin == v.origin => c,
            _ => {
                log::info!("cloning {url} at {commit}");
                if target.exists() {
                    std::fs::remove_dir_all(&target).map_err(|e| io(&target, e))?;
                }
                if let Some(parent) = target.parent() {
                    std::fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
                }
                let t = target.to_string_lossy().into_owned();
                git(&["clone", "--quiet", "--no-checkout", url, &t], None).map_err(|message| {
                    CheckoutError::Clone {
                        url: url.clone(),
                        message,
                    }
                })?;
                git(&["checkout", "--quiet", "--detach", commit], Some(&target)).map_err(|_| {
                    CheckoutError::MissingCommit {
                        url: url.clone(),
                        commit: commit.clone(),
                    }
                })?;
                let info = CheckoutInfo {
                    origin: v.origin.clone(),
                    tree_hash: tree_hash(&target)?,
                };
                write_marker(&target, &info)?;
                info
            }
        },
    };
    for root in &v.source_roots {
        if !target.join(root).is_dir() {
            return Err(CheckoutError::MissingSourceRoot {
                version: v.key(),
                root: root.clone(),
            });
        }
    }
    Ok((target, info))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn local(path: &str, roots: &[&str]) -> ProjectVersion {
        ProjectVersion {
            project: "p".into(),
            version: "v1".into(),
            origin: Origin::Local(path.into()),
            source_roots: roots.iter().map(|s| s.to_string()).collect(),
            handcrafted: false,
        }
    }

    #[test]
    fn local_checkout_is_cached_and_stable() {
        let ds = tempfile::tempdir().unwrap();
        let ws = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(ds.path().join("proj/src")).unwrap();
        std::fs::write(ds.path().join("proj/src/A.java"), "class A {}").unwrap();
        let v = local("proj", &["src"]);
        let (dir, first) = checkout(ds.path(), ws.path(), &v).unwrap();
        assert!(dir.join("src/A.java").is_file());
        let (_, second) = checkout(ds.path(), ws.path(), &v).unwrap();
        assert_eq!(first, second);
        assert_eq!(tree_hash(&dir).unwrap(), first.tree_hash);
    }

    #[test]
    fn missing_root_is_reported() {
        let ds = tempfile::tempdir().unwrap();
        let ws = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(ds.path().join("proj")).unwrap();
        let err = checkout(ds.path(), ws.path(), &local("proj", &["src"])).unwrap_err();
        assert!(matches!(err, CheckoutError::MissingSourceRoot { .. }));
    }

    #[test]
    fn bad_commit_is_named() {
        let repo = tempfile::tempdir().unwrap();
        let ws = tempfile::tempdir().unwrap();
        let r = repo.path();
        let ok = |args: &[&str]| git(args, Some(r)).unwrap();
        ok(&["init", "--quiet"]);
        std::fs::create_dir(r.join("src")).unwrap();
        std::fs::write(r.join("src/A.java"), "class A {}").unwrap();
        ok(&["add", "."]);
        ok(&["-c", "user.name=t", "-c", "user.email=t@t", "commit", "--quiet", "-m", "init"]);
        let commit = "0123456789abcdef0123456789abcdef01234567";
        let v = ProjectVersion {
            project: "p".into(),
            version: "v".into(),
            origin: Origin::Git {
                url: r.to_string_lossy().into_owned(),
                commit: commit.into(),
            },
            source_roots: vec!["src".into()],
            handcrafted: false,
        };
        let err = checkout(Path::new("."), ws.path(), &v).unwrap_err();
        assert!(err.to_string().contains(commit), "{err}");
    }
}
