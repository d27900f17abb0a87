//! Static reviewer token table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TokenError {
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("duplicate token for reviewers `{0}` and `{1}`")]
    Duplicate(String, String),
    #[error("empty token for reviewer `{0}`")]
    Empty(String),
    #[error("{0} primary reviewers configured; at most 2 allowed")]
    TooManyPrimary(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub token: String,
    pub reviewer: String,
    /// Primary reviewers' first-round decisions enter kappa.
    #[serde(default)]
    pub primary: bool,
}

#[derive(Debug, Clone, Default)]
pub struct TokenTable {
    by_token: BTreeMap<String, TokenEntry>,
}

impl TokenTable {
    pub fn new(entries: Vec<TokenEntry>) -> Result<Self, TokenError> {
        let mut by_token: BTreeMap<String, TokenEntry> = BTreeMap::new();
        for e in entries {
            if e.token.is_empty() {
                return Err(TokenError::Empty(e.reviewer));
            }
            if let Some(old) = by_token.get(&e.token) {
                return Err(TokenError::Duplicate(old.reviewer.clone(), e.reviewer));
            }
            by_token.insert(e.token.clone(), e);
        }
        let table = Self { by_token };
        let n = table.primary().len();
        if n > 2 {
            return Err(TokenError::TooManyPrimary(n));
        }
        Ok(table)
    }

    /// Reads a JSON array of `{token, reviewer, primary}` objects.
    pub fn load(path: &Path) -> Result<Self, TokenError> {
        let err = |message: String| TokenError::Read {
            path: path.to_owned(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let entries: Vec<TokenEntry> = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        Self::new(entries)
    }

    pub fn reviewer(&self, token: &str) -> Option<&str> {
        self.by_token.get(token).map(|e| e.reviewer.as_str())
    }

    /// Primary reviewer ids, sorted.
    pub fn primary(&self) -> Vec<String> {
        let mut v: Vec<String> = self.by_token.values().filter(|e| e.primary).map(|e| e.reviewer.clone()).collect();
        v.sort();
        v.dedup();
        v
    }
}
