//! Temporal detector: per-object temporal facts (must-call, order on
//! normal paths, order on exceptional paths) mined as itemsets; violations
//! are ranked by the conviction of present facts implying missing ones.

use std::collections::{BTreeMap, BTreeSet};

use super::call_pairs::ObjectUsage;
use super::{dedupe_by, object_tid, DetectError, DetectorConfig};
use crate::extract::{called_objects, to_temporal_facts};
use crate::mining::{mine_closed_frequent_with, Deadline, ItemCorpus, Pattern, Transaction};
use crate::model::{Finding, MethodUsageModel, Score};

pub const ID: &str = "temporal";

/// Conviction of `P -> M` from absolute counts: `n` transactions, `c_m`
/// containing M, `c_p` containing P and `c_pm` containing both.
/// Confidence 1 gives [`Score::Infinite`].
pub fn conviction(n: usize, c_m: usize, c_p: usize, c_pm: usize) -> Score {
    if c_p == c_pm {
        return Score::Infinite;
    }
    let num = (n - c_m) as f64 * c_p as f64;
    let den = n as f64 * (c_p - c_pm) as f64;
    Score::Finite(num / den)
}

pub fn usages(models: &[MethodUsageModel], config: &DetectorConfig) -> Vec<ObjectUsage> {
    let mut out = Vec::new();
    for (i, m) in models.iter().enumerate() {
        for obj in called_objects(m) {
            let Ok(facts) = to_temporal_facts(m, obj) else { continue };
            out.push(ObjectUsage {
                location: m.location.clone(),
                object: obj.to_owned(),
                transaction: Transaction::new(
                    object_tid(i, obj),
                    facts.iter().map(|f| f.token(config.signature_mode)),
                ),
            });
        }
    }
    out
}

fn count_containing(corpus: &ItemCorpus, items: &BTreeSet<&str>) -> usize {
    let mut tids: Option<Vec<u32>> = None;
    for item in items {
        let Ok(i) = corpus.vocab.binary_search_by(|v| v.as_str().cmp(item)) else {
            return 0;
        };
        let list = &corpus.tidlists[i];
        tids = Some(match tids {
            None => list.clone(),
            Some(t) => t.into_iter().filter(|x| list.binary_search(x).is_ok()).collect(),
        });
    }
    tids.map_or(corpus.transactions.len(), |t| t.len())
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
    let corpus = ItemCorpus::new(&txs)?;
    let n = txs.len();

    let per_pattern = config.execution.map(&patterns, |p: &Pattern| {
        deadline.check()?;
        let pset = p.item_set();
        let mut found = Vec::new();
        for u in usages {
            let present: BTreeSet<&str> =
                u.transaction.items.iter().map(String::as_str).filter(|x| pset.contains(x)).collect();
            let missing: BTreeSet<&str> = pset.difference(&present).copied().collect();
            if present.is_empty() || !(1..=config.max_missing_facts).contains(&missing.len()) {
                continue;
            }
            let c_p = count_containing(&corpus, &present);
            let c_m = count_containing(&corpus, &missing);
            let score = conviction(n, c_m, c_p, p.support);
            found.push(Finding {
                detector_id: ID.to_owned(),
                location: u.location.clone(),
                score,
                pattern_support: p.support,
                pattern_facts: p.items.iter().cloned().collect(),
                present_facts: present.iter().map(|s| s.to_string()).collect(),
                missing_facts: missing.iter().map(|s| s.to_string()).collect(),
                redundant_facts: BTreeSet::new(),
                metadata: BTreeMap::from([("object".to_owned(), u.object.clone())]),
            });
        }
        Ok::<_, DetectError>(found)
    });
    let mut all = Vec::new();
    for r in per_pattern {
        all.extend(r?);
    }
    Ok(dedupe_by(all, |f| {
        (f.location.clone(), f.metadata.get("object").cloned(), f.missing_facts.clone())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::testing::*;
    use crate::model::{MethodSignature, UsageEvent};

    fn cfg() -> DetectorConfig {
        DetectorConfig::for_kind(crate::detect::DetectorKind::Temporal)
    }

    fn writer(file: &str, guarded: bool) -> MethodUsageModel {
        let mut m = usage(file, "m", "Writer", &[]);
        let call = |n: &str| UsageEvent::Call {
            object: "o".into(),
            method: MethodSignature::of(Some("Writer"), n, 0),
        };
        if guarded {
            m.events = vec![UsageEvent::TryEnter, call("write"), UsageEvent::FinallyEnter, call("close"), UsageEvent::TryExit];
            m.exceptional_successors.insert((1, 3));
        } else {
            m.events = vec![call("write"), call("close")];
        }
        m
    }

    #[test]
    fn conviction_edges() {
        // supp(M) = 0 and conf = 0.
        assert_eq!(conviction(10, 0, 4, 0), Score::Finite(1.0));
        assert_eq!(conviction(10, 5, 4, 4), Score::Infinite);
        // 51 usages, M in 50, P in 51, both in 50: (1/51) / (1/51) = 1.
        assert_eq!(conviction(51, 50, 51, 50), Score::Finite(1.0));
        match conviction(100, 20, 60, 50) {
            Score::Finite(v) => assert!((v - (0.8 / (1.0 - 50.0 / 60.0))).abs() < 1e-12),
            Score::Infinite => panic!(),
        }
    }

    #[test]
    fn unguarded_writer_misses_exception_fact() {
        let mut models: Vec<_> = (0..50).map(|i| writer(&format!("C{i}.java"), true)).collect();
        models.push(writer("X.java", false));
        let mut c = cfg();
        c.min_support = 50;
        let f = detect(&models, &c, Deadline::none()).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].location.file_path, "X.java");
        assert_eq!(f[0].missing_facts, BTreeSet::from(["exc:Writer.write/0>Writer.close/0".to_owned()]));
    }

    #[test]
    fn associated_facts_give_conviction_above_one() {
        // write/close co-occur in 40 usages; 10 usages only write; one writes without close.
        let mut models: Vec<_> = (0..40).map(|i| usage(&format!("C{i}.java"), "m", "W", &["write", "close"])).collect();
        for i in 0..10 {
            models.push(usage(&format!("L{i}.java"), "m", "W", &["flush"]));
        }
        models.push(usage("X.java", "m", "W", &["write"]));
        let f = detect(&models, &cfg(), Deadline::none()).unwrap();
        let x: Vec<_> = f.iter().filter(|f| f.location.file_path == "X.java").collect();
        assert_eq!(x.len(), 1);
        match x[0].score {
            Score::Finite(v) => assert!(v > 1.0),
            Score::Infinite => panic!("violator present, confidence < 1"),
        }
    }
}
