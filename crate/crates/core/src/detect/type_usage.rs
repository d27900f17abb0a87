//! Type-usage detector: a usage is strange when few usages of its type
//! call exactly the same methods and many call the same plus one more.

use std::collections::{BTreeMap, BTreeSet};

use super::{object_tid, DetectError, DetectorConfig};
use crate::extract::to_type_usages;
use crate::mining::{Deadline, Transaction};
use crate::model::{Finding, MethodUsageModel, Score, SourceLocation};

pub const ID: &str = "type-usage";

/// `1 - |E| / (|E| + |A|)`, defined as 0 when both are empty.
pub fn strangeness(exactly_similar: usize, almost_similar: usize) -> f64 {
    let total = exactly_similar + almost_similar;
    if total == 0 {
        return 0.0;
    }
    almost_similar as f64 / total as f64
}

#[derive(Debug, Clone)]
struct Usage {
    location: SourceLocation,
    object: String,
    receiver_type: String,
    calls: BTreeSet<String>,
}

fn collect(models: &[MethodUsageModel], config: &DetectorConfig) -> Vec<(usize, Usage)> {
    let mut out = Vec::new();
    for (i, m) in models.iter().enumerate() {
        for tu in to_type_usages(m) {
            // Usages of unresolved receivers cannot be grouped by type.
            let Some(ty) = tu.receiver_type else { continue };
            out.push((
                i,
                Usage {
                    location: tu.context,
                    object: tu.object,
                    receiver_type: ty,
                    calls: tu.calls.iter().map(|s| s.render(config.signature_mode)).collect(),
                },
            ));
        }
    }
    out
}

pub fn transactions(models: &[MethodUsageModel], config: &DetectorConfig) -> Vec<Transaction> {
    collect(models, config)
        .into_iter()
        .map(|(i, u)| Transaction::new(object_tid(i, &u.object), u.calls))
        .collect()
}

fn ancestors(ty: &str, supertypes: &BTreeMap<String, BTreeSet<String>>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut stack = vec![ty.to_owned()];
    while let Some(t) = stack.pop() {
        if let Some(supers) = supertypes.get(&t) {
            for s in supers {
                if out.insert(s.clone()) {
                    stack.push(s.clone());
                }
            }
        }
    }
    out
}

pub fn detect(
    models: &[MethodUsageModel],
    config: &DetectorConfig,
    deadline: Deadline,
) -> Result<Vec<Finding>, DetectError> {
    let usages: Vec<Usage> = collect(models, config).into_iter().map(|(_, u)| u).collect();

    // Distinct call sets per type with multiplicities.
    let mut by_type: BTreeMap<&str, BTreeMap<&BTreeSet<String>, usize>> = BTreeMap::new();
    for u in &usages {
        *by_type.entry(&u.receiver_type).or_default().entry(&u.calls).or_insert(0) += 1;
    }
    let types: Vec<&str> = by_type.keys().copied().collect();
    let compatible: BTreeMap<&str, Vec<&str>> = types
        .iter()
        .map(|&t| {
            let peers = if config.subtype_aware {
                let up = ancestors(t, &config.supertypes);
                types
                    .iter()
                    .copied()
                    .filter(|&o| o == t || up.contains(o) || ancestors(o, &config.supertypes).contains(t))
                    .collect()
            } else {
                vec![t]
            };
            (t, peers)
        })
        .collect();

    let results = config.execution.map(&usages, |x: &Usage| {
        deadline.check()?;
        let mut e = 0;
        let mut a = 0;
        let mut missing = BTreeSet::new();
        for peer in &compatible[x.receiver_type.as_str()] {
            for (set, &n) in &by_type[peer] {
                if *set == &x.calls {
                    e += n;
                } else if set.len() == x.calls.len() + 1 && x.calls.is_subset(set) {
                    a += n;
                    missing.extend(set.difference(&x.calls).cloned());
                }
            }
        }
        e -= 1; // x itself
        let s = strangeness(e, a);
        if s <= config.strangeness_threshold || missing.is_empty() {
            return Ok(None);
        }
        Ok::<_, DetectError>(Some(Finding {
            detector_id: ID.to_owned(),
            location: x.location.clone(),
            score: Score::Finite(s),
            pattern_support: a,
            pattern_facts: x.calls.union(&missing).cloned().collect(),
            present_facts: x.calls.clone(),
            missing_facts: missing,
            redundant_facts: BTreeSet::new(),
            metadata: BTreeMap::from([
                ("object".to_owned(), x.object.clone()),
                ("type".to_owned(), x.receiver_type.clone()),
                ("exactly_similar".to_owned(), e.to_string()),
                ("almost_similar".to_owned(), a.to_string()),
            ]),
        }))
    });
    let mut out = Vec::new();
    for r in results {
        out.extend(r?);
    }
    Ok(out)
}
