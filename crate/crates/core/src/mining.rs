//! Closed frequent itemset mining.
//!
//! [`mine_closed_frequent`] enumerates closed itemsets by prefix-preserving
//! closure extension over transaction-id lists, so every closed set is
//! produced exactly once without a duplicate check.

use std::collections::{BTreeSet, HashSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par::Execution;

pub const BRUTE_FORCE_MAX_ITEMS: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MiningError {
    #[error("duplicate transaction id `{0}`")]
    DuplicateId(String),
    #[error("item universe of {0} exceeds the brute-force limit of {BRUTE_FORCE_MAX_ITEMS}")]
    TooManyItems(usize),
    #[error("mining cancelled at deadline")]
    Cancelled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: String,
    pub items: BTreeSet<String>,
}

impl Transaction {
    pub fn new<I, S>(id: impl Into<String>, items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            id: id.into(),
            items: items.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    /// Sorted fact tokens.
    pub items: Vec<String>,
    pub support: usize,
    /// Ids of supporting transactions in input order.
    pub supporting_ids: Vec<String>,
}

impl Pattern {
    pub fn item_set(&self) -> BTreeSet<&str> {
        self.items.iter().map(String::as_str).collect()
    }
}

/// Wall-clock limit checked cooperatively by long-running loops.
#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    at: Option<Instant>,
}

impl Deadline {
    pub fn none() -> Self {
        Self { at: None }
    }

    pub fn after(timeout: Duration) -> Self {
        Self {
            at: Instant::now().checked_add(timeout),
        }
    }

    pub fn expired(&self) -> bool {
        self.at.is_some_and(|t| Instant::now() >= t)
    }

    pub fn check(&self) -> Result<(), MiningError> {
        if self.expired() {
            Err(MiningError::Cancelled)
        } else {
            Ok(())
        }
    }
}

/// Transactions with interned, lexicographically numbered items.
#[derive(Debug, Clone)]
pub struct ItemCorpus {
    pub vocab: Vec<String>,
    pub transactions: Vec<Vec<u32>>,
    pub tidlists: Vec<Vec<u32>>,
}

impl ItemCorpus {
    pub fn new(transactions: &[Transaction]) -> Result<Self, MiningError> {
        let mut ids = HashSet::new();
        for t in transactions {
            if !ids.insert(t.id.as_str()) {
                return Err(MiningError::DuplicateId(t.id.clone()));
            }
        }
        let vocab: Vec<String> = transactions
            .iter()
            .flat_map(|t| t.items.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let encoded: Vec<Vec<u32>> = transactions
            .iter()
            .map(|t| {
                // BTreeSet iteration is sorted, so ids come out sorted too.
                t.items
                    .iter()
                    .map(|i| vocab.binary_search(i).expect("item in vocab") as u32)
                    .collect()
            })
            .collect();
        let mut tidlists = vec![Vec::new(); vocab.len()];
        for (tid, items) in encoded.iter().enumerate() {
            for &i in items {
                tidlists[i as usize].push(tid as u32);
            }
        }
        Ok(Self {
            vocab,
            transactions: encoded,
            tidlists,
        })
    }

    /// Items contained in every listed transaction.
    fn closure(&self, tids: &[u32], counts: &mut [u32]) -> Vec<u32> {
        counts.iter_mut().for_each(|c| *c = 0);
        for &t in tids {
            for &i in &self.transactions[t as usize] {
                counts[i as usize] += 1;
            }
        }
        let n = tids.len() as u32;
        counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == n)
            .map(|(i, _)| i as u32)
            .collect()
    }
}

fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len().min(b.len()));
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

struct Raw {
    items: Vec<u32>,
    tids: Vec<u32>,
}

struct Miner<'c> {
    corpus: &'c ItemCorpus,
    min_support: usize,
    frequent: Vec<u32>,
    deadline: Deadline,
}

impl Miner<'_> {
    /// Tries extending closed set `p` by item `e`; returns the new closed
    /// set if it is frequent and its closure preserves the prefix below `e`.
    fn extend(&self, p: &[u32], tids: &[u32], e: u32, counts: &mut [u32]) -> Option<Raw> {
        let t = intersect(tids, &self.corpus.tidlists[e as usize]);
        if t.len() < self.min_support {
            return None;
        }
        let q = self.corpus.closure(&t, counts);
        let below = |s: &[u32]| s.iter().copied().filter(|&x| x < e).collect::<Vec<_>>();
        if below(&q) != below(p) {
            return None;
        }
        Some(Raw { items: q, tids: t })
    }

    fn expand(&self, p: &Raw, core: u32, counts: &mut [u32], out: &mut Vec<Raw>) -> Result<(), MiningError> {
        self.deadline.check()?;
        for &e in self.frequent.iter().filter(|&&e| e > core) {
            if p.items.binary_search(&e).is_ok() {
                continue;
            }
            if let Some(q) = self.extend(&p.items, &p.tids, e, counts) {
                self.expand(&q, e, counts, out)?;
                out.push(q);
            }
        }
        Ok(())
    }
}

fn finish(corpus: &ItemCorpus, transactions: &[Transaction], raws: Vec<Raw>) -> Vec<Pattern> {
    let mut patterns: Vec<Pattern> = raws
        .into_iter()
        .map(|r| Pattern {
            items: r.items.iter().map(|&i| corpus.vocab[i as usize].clone()).collect(),
            support: r.tids.len(),
            supporting_ids: r.tids.iter().map(|&t| transactions[t as usize].id.clone()).collect(),
        })
        .collect();
    sort_patterns(&mut patterns);
    patterns
}

/// Support descending, then items lexicographically.
pub fn sort_patterns(patterns: &mut [Pattern]) {
    patterns.sort_by(|a, b| b.support.cmp(&a.support).then_with(|| a.items.cmp(&b.items)));
}

/// All non-empty closed itemsets with support at least `min_support`
/// (clamped to 1).
pub fn mine_closed_frequent(
    transactions: &[Transaction],
    min_support: usize,
) -> Result<Vec<Pattern>, MiningError> {
    mine_closed_frequent_with(transactions, min_support, Deadline::none(), Execution::default())
}

pub fn mine_closed_frequent_with(
    transactions: &[Transaction],
    min_support: usize,
    deadline: Deadline,
    exec: Execution,
) -> Result<Vec<Pattern>, MiningError> {
    let min_support = min_support.max(1);
    let corpus = ItemCorpus::new(transactions)?;
    if transactions.len() < min_support {
        return Ok(Vec::new());
    }
    let frequent: Vec<u32> = (0..corpus.vocab.len() as u32)
        .filter(|&i| corpus.tidlists[i as usize].len() >= min_support)
        .collect();
    let miner = Miner {
        corpus: &corpus,
        min_support,
        frequent,
        deadline,
    };
    let width = corpus.vocab.len();
    let all: Vec<u32> = (0..transactions.len() as u32).collect();
    let root = Raw {
        items: corpus.closure(&all, &mut vec![0; width]),
        tids: all,
    };

    let branches: Vec<u32> = miner
        .frequent
        .iter()
        .copied()
        .filter(|e| root.items.binary_search(e).is_err())
        .collect();
    let results = exec.map(&branches, |&e| {
        let mut counts = vec![0; width];
        let mut out = Vec::new();
        if let Some(q) = miner.extend(&root.items, &root.tids, e, &mut counts) {
            miner.expand(&q, e, &mut counts, &mut out)?;
            out.push(q);
        }
        Ok::<_, MiningError>(out)
    });
    let mut raws = Vec::new();
    if !root.items.is_empty() {
        raws.push(root);
    }
    for r in results {
        raws.extend(r?);
    }
    Ok(finish(&corpus, transactions, raws))
}

/// Exhaustive reference implementation over all item subsets.
pub fn brute_force_frequent(
    transactions: &[Transaction],
    min_support: usize,
) -> Result<Vec<Pattern>, MiningError> {
    let min_support = min_support.max(1);
    let corpus = ItemCorpus::new(transactions)?;
    let n = corpus.vocab.len();
    if n > BRUTE_FORCE_MAX_ITEMS {
        return Err(MiningError::TooManyItems(n));
    }
    let masks: Vec<u32> = corpus
        .transactions
        .iter()
        .map(|t| t.iter().fold(0u32, |m, &i| m | (1 << i)))
        .collect();
    let support = |set: u32| masks.iter().filter(|&&m| m & set == set).count();
    let mut raws = Vec::new();
    for set in 1u32..(1u32 << n) {
        let s = support(set);
        if s < min_support {
            continue;
        }
        let closed = (0..n).all(|i| set & (1 << i) != 0 || support(set | (1 << i)) < s);
        if closed {
            raws.push(Raw {
                items: (0..n as u32).filter(|i| set & (1 << i) != 0).collect(),
                tids: masks
                    .iter()
                    .enumerate()
                    .filter(|(_, &m)| m & set == set)
                    .map(|(t, _)| t as u32)
                    .collect(),
            });
        }
    }
    Ok(finish(&corpus, transactions, raws))
}
