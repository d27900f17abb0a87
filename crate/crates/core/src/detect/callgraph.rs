//! Name-based call graph over one corpus: a call to `m` may reach any
//! method named `m`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::model::MethodUsageModel;

#[derive(Debug, Default)]
pub struct CallGraph {
    /// Method name to the names it calls (union over same-named methods).
    callees: BTreeMap<String, BTreeSet<String>>,
}

impl CallGraph {
    pub fn build(models: &[MethodUsageModel]) -> Self {
        let mut callees: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for m in models {
            callees
                .entry(m.location.method_name.clone())
                .or_default()
                .extend(m.calls().map(|(_, _, s)| s.name.clone()));
        }
        Self { callees }
    }

    /// Names called by methods reachable from `caller` within `depth` call
    /// levels, excluding `caller`'s own calls.
    pub fn reachable_calls(&self, caller: &str, depth: usize) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut visited = BTreeSet::from([caller.to_owned()]);
        let mut queue = VecDeque::new();
        for c in self.callees.get(caller).into_iter().flatten() {
            queue.push_back((c.clone(), 1));
        }
        while let Some((name, level)) = queue.pop_front() {
            if level > depth || !visited.insert(name.clone()) {
                continue;
            }
            if let Some(calls) = self.callees.get(&name) {
                for c in calls {
                    out.insert(c.clone());
                    queue.push_back((c.clone(), level + 1));
                }
            }
        }
        out
    }
}
