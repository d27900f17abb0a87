//! Call-pair detector: per-object call-order pairs, mined as itemsets; an
//! object violates a pattern when it lacks a few of its pairs.

use std::collections::{BTreeMap, BTreeSet};

use super::{dedupe_by, object_tid, DetectError, DetectorConfig};
use crate::extract::{called_objects, to_call_pairs};
use crate::mining::{mine_closed_frequent_with, Deadline, Pattern, Transaction};
use crate::model::{Finding, MethodUsageModel, Score, SourceLocation};

pub const ID: &str = "call-pair";

#[derive(Debug, Clone)]
pub struct ObjectUsage {
    pub location: SourceLocation,
    pub object: String,
    pub transaction: Transaction,
}

pub fn pair_token(a: &str, b: &str) -> String {
    format!("{a} -> {b}")
}

/// One usage per object with at least one call pair.
pub fn usages(models: &[MethodUsageModel], config: &DetectorConfig) -> Vec<ObjectUsage> {
    let mode = config.signature_mode;
    let mut out = Vec::new();
    for (i, m) in models.iter().enumerate() {
        for obj in called_objects(m) {
            let Ok(facts) = to_call_pairs(m, obj) else { continue };
            if facts.pairs.is_empty() {
                continue;
            }
            out.push(ObjectUsage {
                location: m.location.clone(),
                object: obj.to_owned(),
                transaction: Transaction::new(
                    object_tid(i, obj),
                    facts.pairs.iter().map(|(a, b)| pair_token(&a.render(mode), &b.render(mode))),
                ),
            });
        }
    }
    out
}

/// Fraction of `p`'s facts that no incomparable mined pattern shares,
/// floored at `1/|p|`.
pub fn uniqueness(p: &Pattern, all: &[Pattern]) -> f64 {
    let pset = p.item_set();
    let mut shared = BTreeSet::new();
    for q in all {
        let qset = q.item_set();
        if qset.is_subset(&pset) || pset.is_subset(&qset) {
            continue;
        }
        shared.extend(pset.intersection(&qset).copied());
    }
    let n = pset.len() as f64;
    (((pset.len() - shared.len()) as f64) / n).max(1.0 / n)
}

pub fn detect(
    models: &[MethodUsageModel],
    config: &DetectorConfig,
    deadline: Deadline,
) -> Result<Vec<Finding>, DetectError> {
    detect_usages(&usages(models, config), config, deadline)
}

pub fn detect_usages(
    usages: &[ObjectUsage],
    config: &DetectorConfig,
    deadline: Deadline,
) -> Result<Vec<Finding>, DetectError> {
    config.require_min_support(2)?;
    let txs: Vec<Transaction> = usages.iter().map(|u| u.transaction.clone()).collect();
    let patterns = mine_closed_frequent_with(&txs, config.min_support, deadline, config.execution)?;

    let per_pattern = config.execution.map(&patterns, |p: &Pattern| {
        deadline.check()?;
        let pset = p.item_set();
        let violations: Vec<(&ObjectUsage, BTreeSet<String>, BTreeSet<String>)> = usages
            .iter()
            .filter_map(|u| {
                let present: BTreeSet<String> =
                    u.transaction.items.iter().filter(|x| pset.contains(x.as_str())).cloned().collect();
                let missing = pset.len() - present.len();
                (!present.is_empty() && (1..=config.max_missing_facts).contains(&missing)).then(|| {
                    let missing: BTreeSet<String> = pset
                        .iter()
                        .filter(|x| !present.contains(**x))
                        .map(|s| s.to_string())
                        .collect();
                    (u, present, missing)
                })
            })
            .collect();
        let v = violations.len();
        if v == 0 || (p.support as f64) / (v as f64) < config.rarity_factor {
            return Ok(Vec::new());
        }
        let u = uniqueness(p, &patterns);
        let score = u * p.support as f64 / v as f64;
        Ok::<_, DetectError>(
            violations
                .into_iter()
                .map(|(usage, present, missing)| Finding {
                    detector_id: ID.to_owned(),
                    location: usage.location.clone(),
                    score: Score::Finite(score),
                    pattern_support: p.support,
                    pattern_facts: p.items.iter().cloned().collect(),
                    present_facts: present,
                    missing_facts: missing,
                    redundant_facts: BTreeSet::new(),
                    metadata: BTreeMap::from([
                        ("object".to_owned(), usage.object.clone()),
                        ("uniqueness".to_owned(), format!("{u:.4}")),
                        ("violations".to_owned(), v.to_string()),
                    ]),
                })
                .collect(),
        )
    });
    let mut all = Vec::new();
    for r in per_pattern {
        all.extend(r?);
    }
    Ok(dedupe_by(all, |f| {
        (f.location.clone(), f.metadata.get("object").cloned(), f.missing_facts.clone())
    }))
}
