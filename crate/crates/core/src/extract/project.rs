//! Detector-specific views of a [`MethodUsageModel`].

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::paths::ControlTree;
use super::ExtractError;
use crate::model::{MethodSignature, MethodUsageModel, SignatureMode, SourceLocation, UsageEvent};

/// All methods called in one method body, regardless of receiver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSet {
    pub context: SourceLocation,
    pub calls: BTreeSet<MethodSignature>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallPairFacts {
    pub object: String,
    pub pairs: BTreeSet<(MethodSignature, MethodSignature)>,
}

/// Methods called on one object in one method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeUsage {
    pub object: String,
    pub receiver_type: Option<String>,
    pub context: SourceLocation,
    pub calls: BTreeSet<MethodSignature>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TemporalFact {
    MustCall(MethodSignature),
    Precedes(MethodSignature, MethodSignature),
    FollowsOnException(MethodSignature, MethodSignature),
}

impl TemporalFact {
    /// Fact token used for mining.
    pub fn token(&self, mode: SignatureMode) -> String {
        match self {
            TemporalFact::MustCall(a) => format!("must:{}", a.render(mode)),
            TemporalFact::Precedes(a, b) => format!("prec:{}>{}", a.render(mode), b.render(mode)),
            TemporalFact::FollowsOnException(a, b) => {
                format!("exc:{}>{}", a.render(mode), b.render(mode))
            }
        }
    }
}

impl fmt::Display for TemporalFact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemporalFact::MustCall(a) => write!(f, "MustCall({})", a.name),
            TemporalFact::Precedes(a, b) => write!(f, "Precedes({}, {})", a.name, b.name),
            TemporalFact::FollowsOnException(a, b) => {
                write!(f, "FollowsOnException({}, {})", a.name, b.name)
            }
        }
    }
}

pub fn to_call_set(model: &MethodUsageModel) -> CallSet {
    CallSet {
        context: model.location.clone(),
        calls: model.calls().map(|(_, _, s)| s.clone()).collect(),
    }
}

fn require_object(model: &MethodUsageModel, object: &str) -> Result<(), ExtractError> {
    model
        .object(object)
        .map(|_| ())
        .ok_or_else(|| ExtractError::UnknownObject(object.to_owned()))
}

/// Normal paths restricted to the calls on `object`. Logs when the path
/// cap was hit.
fn object_paths<'m>(model: &'m MethodUsageModel, object: &str) -> Vec<Vec<&'m MethodSignature>> {
    let tree = match ControlTree::build(&model.events) {
        Ok(t) => t,
        Err(e) => {
            log::warn!("{}: malformed event stream: {e}", model.location);
            return Vec::new();
        }
    };
    let set = tree.normal_paths();
    if set.truncated {
        log::warn!(
            "{}: more than {} paths; ordering facts use the first {}",
            model.location,
            super::paths::MAX_PATHS,
            super::paths::MAX_PATHS
        );
    }
    set.paths
        .iter()
        .map(|p| p.iter().filter_map(|&i| model.events[i].call_on(object)).collect())
        .collect()
}

/// Ordered call pairs on some normal path. Pairs of a call with itself
/// arise from loop unrolling.
pub fn to_call_pairs(model: &MethodUsageModel, object: &str) -> Result<CallPairFacts, ExtractError> {
    require_object(model, object)?;
    let mut pairs = BTreeSet::new();
    for path in object_paths(model, object) {
        for (i, a) in path.iter().enumerate() {
            for b in &path[i + 1..] {
                pairs.insert(((*a).clone(), (*b).clone()));
            }
        }
    }
    Ok(CallPairFacts {
        object: object.to_owned(),
        pairs,
    })
}

pub fn to_type_usages(model: &MethodUsageModel) -> Vec<TypeUsage> {
    model
        .objects
        .iter()
        .filter_map(|o| {
            let calls: BTreeSet<_> = model
                .events
                .iter()
                .filter_map(|e| e.call_on(&o.name).cloned())
                .collect();
            (!calls.is_empty()).then(|| TypeUsage {
                object: o.name.clone(),
                receiver_type: o.static_type.clone(),
                context: model.location.clone(),
                calls,
            })
        })
        .collect()
}

pub fn to_temporal_facts(
    model: &MethodUsageModel,
    object: &str,
) -> Result<BTreeSet<TemporalFact>, ExtractError> {
    require_object(model, object)?;
    let called: BTreeSet<&MethodSignature> = model
        .events
        .iter()
        .filter_map(|e| e.call_on(object))
        .collect();
    let mut facts: BTreeSet<TemporalFact> =
        called.iter().map(|s| TemporalFact::MustCall((*s).clone())).collect();

    let paths = object_paths(model, object);
    for a in &called {
        for b in &called {
            if a == b {
                continue;
            }
            let mut seen_both = false;
            let all_ordered = paths.iter().all(|p| {
                let first_a = p.iter().position(|s| s == a);
                let last_b = p.iter().rposition(|s| s == b);
                match (first_a, last_b) {
                    (Some(i), Some(j)) => {
                        seen_both = true;
                        i < j
                    }
                    _ => true,
                }
            });
            if seen_both && all_ordered {
                facts.insert(TemporalFact::Precedes((*a).clone(), (*b).clone()));
            }
        }
    }

    for &(i, j) in &model.exceptional_successors {
        if let (Some(a), Some(b)) = (model.events[i].call_on(object), model.events[j].call_on(object)) {
            if a != b {
                facts.insert(TemporalFact::FollowsOnException(a.clone(), b.clone()));
            }
        }
    }
    Ok(facts)
}

/// Objects with at least one call, in declaration order.
pub fn called_objects(model: &MethodUsageModel) -> Vec<&str> {
    model
        .objects
        .iter()
        .filter(|o| model.events.iter().any(|e| matches!(e, UsageEvent::Call { object, .. } if *object == o.name)))
        .map(|o| o.name.as_str())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrackedObject;

    fn sig(n: &str) -> MethodSignature {
        MethodSignature::of(None, n, 0)
    }

    fn call(o: &str, n: &str) -> UsageEvent {
        UsageEvent::Call {
            object: o.into(),
            method: sig(n),
        }
    }

    fn model(objects: &[&str], events: Vec<UsageEvent>) -> MethodUsageModel {
        let mut m = MethodUsageModel::empty(SourceLocation::new("p", "v", "A.java", "m", None).unwrap());
        m.objects = objects
            .iter()
            .map(|o| TrackedObject {
                name: (*o).into(),
                static_type: None,
            })
            .collect();
        m.events = events;
        m
    }

    #[test]
    fn call_set_is_union_over_receivers() {
        let m = model(&["a", "b"], vec![call("a", "open"), call("a", "close"), call("b", "log"), call("a", "open")]);
        let names: Vec<_> = to_call_set(&m).calls.into_iter().map(|s| s.name).collect();
        assert_eq!(names, vec!["close", "log", "open"]);
        assert!(to_call_set(&model(&[], vec![])).calls.is_empty());
    }

    #[test]
    fn pairs_follow_order() {
        let m = model(&["it"], vec![call("it", "hasNext"), call("it", "next")]);
        let p = to_call_pairs(&m, "it").unwrap();
        assert_eq!(p.pairs, BTreeSet::from([(sig("hasNext"), sig("next"))]));
        let single = model(&["it"], vec![call("it", "next")]);
        assert!(to_call_pairs(&single, "it").unwrap().pairs.is_empty());
        assert!(matches!(to_call_pairs(&single, "x"), Err(ExtractError::UnknownObject(_))));
    }

    #[test]
    fn loop_header_pairs_with_itself() {
        let m = model(
            &["it"],
            vec![
                UsageEvent::LoopEnter,
                call("it", "hasNext"),
                UsageEvent::LoopBody,
                call("it", "next"),
                UsageEvent::LoopExit,
            ],
        );
        let p = to_call_pairs(&m, "it").unwrap().pairs;
        assert!(p.contains(&(sig("hasNext"), sig("next"))));
        assert!(p.contains(&(sig("hasNext"), sig("hasNext"))));
        assert!(p.contains(&(sig("next"), sig("hasNext"))));
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn writer_facts_with_and_without_finally() {
        let guarded = model(
            &["w"],
            vec![
                UsageEvent::TryEnter,
                call("w", "write"),
                UsageEvent::FinallyEnter,
                call("w", "close"),
                UsageEvent::TryExit,
            ],
        );
        let mut guarded = guarded;
        guarded.exceptional_successors.insert((1, 3));
        let facts = to_temporal_facts(&guarded, "w").unwrap();
        let expected = BTreeSet::from([
            TemporalFact::MustCall(sig("write")),
            TemporalFact::MustCall(sig("close")),
            TemporalFact::Precedes(sig("write"), sig("close")),
            TemporalFact::FollowsOnException(sig("write"), sig("close")),
        ]);
        assert_eq!(facts, expected);

        let plain = model(&["w"], vec![call("w", "write"), call("w", "close")]);
        let mut without = expected;
        without.remove(&TemporalFact::FollowsOnException(sig("write"), sig("close")));
        assert_eq!(to_temporal_facts(&plain, "w").unwrap(), without);
    }

    #[test]
    fn branch_order_conflict_drops_precedes() {
        let m = model(
            &["o"],
            vec![
                UsageEvent::BranchEnter,
                call("o", "a"),
                call("o", "b"),
                UsageEvent::BranchElse,
                call("o", "b"),
                call("o", "a"),
                UsageEvent::BranchExit,
            ],
        );
        let facts = to_temporal_facts(&m, "o").unwrap();
        assert!(!facts.iter().any(|f| matches!(f, TemporalFact::Precedes(..))));
        // Some-path pairs still hold both directions.
        let pairs = to_call_pairs(&m, "o").unwrap().pairs;
        assert!(pairs.contains(&(sig("a"), sig("b"))) && pairs.contains(&(sig("b"), sig("a"))));
    }

    #[test]
    fn single_call_has_only_must_call() {
        let m = model(&["o"], vec![call("o", "m")]);
        assert_eq!(to_temporal_facts(&m, "o").unwrap(), BTreeSet::from([TemporalFact::MustCall(sig("m"))]));
    }

    #[test]
    fn type_usage_per_called_object() {
        let m = model(&["a", "b", "c"], vec![call("a", "x"), call("b", "y")]);
        let tu = to_type_usages(&m);
        assert_eq!(tu.len(), 2);
        assert_eq!(tu[0].object, "a");
        assert_eq!(called_objects(&m), vec!["a", "b"]);
    }
}
