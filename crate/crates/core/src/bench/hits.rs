//! Potential hits: findings in the same file and method as a known misuse.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dataset::KnownMisuse;
use crate::model::{normalize_path, SourceLocation};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PotentialHit {
    pub finding_id: String,
    pub misuse_id: String,
    /// The finding matched more than one misuse (e.g. overloads) and
    /// needs a reviewer to pick.
    #[serde(default)]
    pub ambiguous: bool,
}

/// Bare method name: parameter lists are dropped.
fn method_key(name: &str) -> &str {
    name.split('(').next().unwrap_or(name).trim()
}

fn file_key(path: &str) -> String {
    normalize_path(path).unwrap_or_else(|_| path.replace('\\', "/"))
}

pub fn match_potential_hits<'a, I>(findings: I, misuses: &[KnownMisuse]) -> Vec<PotentialHit>
where
    I: IntoIterator<Item = (&'a str, &'a SourceLocation)>,
{
    let mut index: BTreeMap<(String, &str), Vec<&str>> = BTreeMap::new();
    for m in misuses {
        index
            .entry((file_key(&m.location.file_path), method_key(&m.location.method_name)))
            .or_default()
            .push(&m.id);
    }
    let mut hits = Vec::new();
    for (id, loc) in findings {
        let key = (file_key(&loc.file_path), method_key(&loc.method_name));
        if let Some(ms) = index.get(&key) {
            for m in ms {
                hits.push(PotentialHit {
                    finding_id: id.to_owned(),
                    misuse_id: (*m).to_owned(),
                    ambiguous: ms.len() > 1,
                });
            }
        }
    }
    hits.sort();
    hits.dedup();
    hits
}
