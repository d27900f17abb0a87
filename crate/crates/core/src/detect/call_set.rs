//! Call-set detector: closed frequent sets of called methods per method
//! body; a usage violates a pattern when it calls a strict non-empty part
//! of it and that part rarely occurs without the rest.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Mutex;

use super::callgraph::CallGraph;
use super::{dedupe_by, model_tid, DetectError, DetectorConfig};
use crate::extract::to_call_set;
use crate::mining::{mine_closed_frequent_with, Deadline, ItemCorpus, Pattern, Transaction};
use crate::model::{Finding, MethodUsageModel, Score};

pub const ID: &str = "call-set";

pub fn transactions(models: &[MethodUsageModel], config: &DetectorConfig) -> Vec<Transaction> {
    models
        .iter()
        .enumerate()
        .map(|(i, m)| {
            Transaction::new(
                model_tid(i),
                to_call_set(m).calls.iter().map(|s| s.render(config.signature_mode)),
            )
        })
        .collect()
}

/// Number of usages containing `part` but not the whole pattern.
pub fn violating_count(support_of_part: usize, pattern_support: usize) -> usize {
    support_of_part - pattern_support
}

struct SupportIndex {
    corpus: ItemCorpus,
    cache: Mutex<HashMap<Vec<String>, usize>>,
}

impl SupportIndex {
    fn support(&self, items: &BTreeSet<&str>) -> usize {
        let key: Vec<String> = items.iter().map(|s| s.to_string()).collect();
        if let Some(&n) = self.cache.lock().expect("cache lock").get(&key) {
            return n;
        }
        let mut tids: Option<Vec<u32>> = None;
        for item in items {
            let Ok(i) = self.corpus.vocab.binary_search_by(|v| v.as_str().cmp(item)) else {
                return 0;
            };
            let list = &self.corpus.tidlists[i];
            tids = Some(match tids {
                None => list.clone(),
                Some(t) => t.into_iter().filter(|x| list.binary_search(x).is_ok()).collect(),
            });
        }
        let n = tids.map_or(self.corpus.transactions.len(), |t| t.len());
        self.cache.lock().expect("cache lock").insert(key, n);
        n
    }
}

pub fn detect(
    models: &[MethodUsageModel],
    config: &DetectorConfig,
    deadline: Deadline,
) -> Result<Vec<Finding>, DetectError> {
    config.require_min_support(2)?;
    let txs = transactions(models, config);
    let patterns = mine_closed_frequent_with(&txs, config.min_support, deadline, config.execution)?;
    let index = SupportIndex {
        corpus: ItemCorpus::new(&txs)?,
        cache: Mutex::new(HashMap::new()),
    };
    let graph = (config.interprocedural_depth > 0).then(|| CallGraph::build(models));

    let per_pattern = config.execution.map(&patterns, |p: &Pattern| {
        deadline.check()?;
        let pset = p.item_set();
        let mut found = Vec::new();
        for (i, t) in txs.iter().enumerate() {
            let present: BTreeSet<&str> = t.items.iter().map(String::as_str).filter(|x| pset.contains(x)).collect();
            if present.is_empty() || present.len() == pset.len() {
                continue;
            }
            let v = violating_count(index.support(&present), p.support);
            if v == 0 || (p.support as f64) / (v as f64) < config.rarity_factor {
                continue;
            }
            let missing: BTreeSet<String> = pset.difference(&present).map(|s| s.to_string()).collect();
            if let Some(g) = &graph {
                let reach = g.reachable_calls(&models[i].location.method_name, config.interprocedural_depth);
                let names_missing = bare_names(&missing);
                if names_missing.iter().all(|n| reach.contains(n)) {
                    continue;
                }
            }
            found.push(Finding {
                detector_id: ID.to_owned(),
                location: models[i].location.clone(),
                score: Score::Finite(p.support as f64),
                pattern_support: p.support,
                pattern_facts: p.items.iter().cloned().collect(),
                present_facts: present.iter().map(|s| s.to_string()).collect(),
                missing_facts: missing,
                redundant_facts: BTreeSet::new(),
                metadata: BTreeMap::from([("violating_count".to_owned(), v.to_string())]),
            });
        }
        Ok::<_, DetectError>(found)
    });
    let mut all = Vec::new();
    for r in per_pattern {
        all.extend(r?);
    }
    Ok(dedupe_by(all, |f| (f.location.clone(), f.missing_facts.clone())))
}

/// Bare method names of rendered signatures, for name-based graph lookups.
fn bare_names(missing: &BTreeSet<String>) -> BTreeSet<String> {
    missing
        .iter()
        .map(|s| {
            let no_arity = s.rsplit_once('/').map_or(s.as_str(), |(a, _)| a);
            no_arity.rsplit_once('.').map_or(no_arity, |(_, n)| n).to_owned()
        })
        .collect()
}
