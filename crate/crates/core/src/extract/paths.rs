//! Normal-path enumeration over a method's bracketed event stream.
//!
//! Loops are unrolled at most once: a loop contributes either its header
//! alone or header, body, header. Catch blocks are not on normal paths.

use crate::model::{ModelError, UsageEvent};

/// Paths beyond this count are dropped and the result is marked truncated.
pub const MAX_PATHS: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ControlNode {
    /// Index of a non-structural event (call or check).
    Event(usize),
    Branch(Vec<Vec<ControlNode>>),
    Loop {
        header: Vec<ControlNode>,
        body: Vec<ControlNode>,
    },
    Try {
        body: Vec<ControlNode>,
        catches: Vec<Vec<ControlNode>>,
        finally: Option<Vec<ControlNode>>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlTree {
    pub root: Vec<ControlNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathSet {
    pub paths: Vec<Vec<usize>>,
    pub truncated: bool,
}

struct Builder<'a> {
    events: &'a [UsageEvent],
    pos: usize,
}

#[derive(PartialEq, Eq, Clone, Copy)]
enum Stop {
    End,
    BranchElse,
    BranchExit,
    LoopBody,
    LoopExit,
    CatchEnter,
    FinallyEnter,
    TryExit,
}

impl Builder<'_> {
    fn unbalanced(&self, detail: &'static str) -> ModelError {
        ModelError::Unbalanced {
            index: self.pos.min(self.events.len().saturating_sub(1)),
            detail,
        }
    }

    /// Parses a sequence up to (not consuming) a structural terminator.
    fn seq(&mut self) -> Result<(Vec<ControlNode>, Stop), ModelError> {
        let mut out = Vec::new();
        while let Some(ev) = self.events.get(self.pos) {
            let stop = match ev {
                UsageEvent::BranchElse => Some(Stop::BranchElse),
                UsageEvent::BranchExit => Some(Stop::BranchExit),
                UsageEvent::LoopBody => Some(Stop::LoopBody),
                UsageEvent::LoopExit => Some(Stop::LoopExit),
                UsageEvent::CatchEnter { .. } => Some(Stop::CatchEnter),
                UsageEvent::FinallyEnter => Some(Stop::FinallyEnter),
                UsageEvent::TryExit => Some(Stop::TryExit),
                _ => None,
            };
            if let Some(stop) = stop {
                return Ok((out, stop));
            }
            let at = self.pos;
            self.pos += 1;
            match ev {
                UsageEvent::BranchEnter => out.push(self.branch()?),
                UsageEvent::LoopEnter => out.push(self.looped()?),
                UsageEvent::TryEnter => out.push(self.tried()?),
                _ => out.push(ControlNode::Event(at)),
            }
        }
        Ok((out, Stop::End))
    }

    fn branch(&mut self) -> Result<ControlNode, ModelError> {
        let mut arms = Vec::new();
        loop {
            let (arm, stop) = self.seq()?;
            arms.push(arm);
            match stop {
                Stop::BranchElse => self.pos += 1,
                Stop::BranchExit => {
                    self.pos += 1;
                    return Ok(ControlNode::Branch(arms));
                }
                _ => return Err(self.unbalanced("branch not closed")),
            }
        }
    }

    fn looped(&mut self) -> Result<ControlNode, ModelError> {
        let (header, stop) = self.seq()?;
        if stop != Stop::LoopBody {
            return Err(self.unbalanced("loop without body marker"));
        }
        self.pos += 1;
        let (body, stop) = self.seq()?;
        if stop != Stop::LoopExit {
            return Err(self.unbalanced("loop not closed"));
        }
        self.pos += 1;
        Ok(ControlNode::Loop { header, body })
    }

    fn tried(&mut self) -> Result<ControlNode, ModelError> {
        let (body, mut stop) = self.seq()?;
        let mut catches = Vec::new();
        let mut finally = None;
        while stop == Stop::CatchEnter {
            self.pos += 1;
            let (c, s) = self.seq()?;
            catches.push(c);
            stop = s;
        }
        if stop == Stop::FinallyEnter {
            self.pos += 1;
            let (f, s) = self.seq()?;
            finally = Some(f);
            stop = s;
        }
        if stop != Stop::TryExit {
            return Err(self.unbalanced("try not closed"));
        }
        self.pos += 1;
        Ok(ControlNode::Try {
            body,
            catches,
            finally,
        })
    }
}

impl ControlTree {
    pub fn build(events: &[UsageEvent]) -> Result<Self, ModelError> {
        let mut b = Builder { events, pos: 0 };
        let (root, stop) = b.seq()?;
        if stop != Stop::End {
            return Err(b.unbalanced("unexpected closing marker"));
        }
        Ok(ControlTree { root })
    }

    /// Enumerates normal paths as sequences of event indices.
    pub fn normal_paths(&self) -> PathSet {
        let mut truncated = false;
        let paths = seq_paths(&self.root, &mut truncated);
        PathSet { paths, truncated }
    }
}

fn product(a: Vec<Vec<usize>>, b: &[Vec<usize>], truncated: &mut bool) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity((a.len() * b.len()).min(MAX_PATHS));
    'outer: for x in &a {
        for y in b {
            if out.len() == MAX_PATHS {
                *truncated = true;
                break 'outer;
            }
            let mut p = x.clone();
            p.extend_from_slice(y);
            out.push(p);
        }
    }
    out
}

fn union(mut a: Vec<Vec<usize>>, b: Vec<Vec<usize>>, truncated: &mut bool) -> Vec<Vec<usize>> {
    for p in b {
        if a.len() == MAX_PATHS {
            *truncated = true;
            break;
        }
        if !a.contains(&p) {
            a.push(p);
        }
    }
    a
}

fn seq_paths(nodes: &[ControlNode], truncated: &mut bool) -> Vec<Vec<usize>> {
    let mut acc = vec![Vec::new()];
    for node in nodes {
        let next = node_paths(node, truncated);
        acc = product(acc, &next, truncated);
    }
    acc
}

fn node_paths(node: &ControlNode, truncated: &mut bool) -> Vec<Vec<usize>> {
    match node {
        ControlNode::Event(i) => vec![vec![*i]],
        ControlNode::Branch(arms) => {
            let mut out = Vec::new();
            for arm in arms {
                out = union(out, seq_paths(arm, truncated), truncated);
            }
            if arms.len() == 1 {
                out = union(out, vec![Vec::new()], truncated);
            }
            out
        }
        ControlNode::Loop { header, body } => {
            let h = seq_paths(header, truncated);
            let b = seq_paths(body, truncated);
            let once = product(product(h.clone(), &b, truncated), &h, truncated);
            union(h, once, truncated)
        }
        ControlNode::Try { body, finally, .. } => {
            let b = seq_paths(body, truncated);
            match finally {
                Some(f) => product(b, &seq_paths(f, truncated), truncated),
                None => b,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MethodSignature;

    fn call(name: &str) -> UsageEvent {
        UsageEvent::Call {
            object: "o".into(),
            method: MethodSignature::of(None, name, 0),
        }
    }

    #[test]
    fn straight_line_is_one_path() {
        let t = ControlTree::build(&[call("a"), call("b")]).unwrap();
        assert_eq!(t.normal_paths().paths, vec![vec![0, 1]]);
    }

    #[test]
    fn if_without_else_has_skip_path() {
        let ev = [UsageEvent::BranchEnter, call("a"), UsageEvent::BranchExit];
        let p = ControlTree::build(&ev).unwrap().normal_paths();
        assert_eq!(p.paths, vec![vec![1], vec![]]);
    }

    #[test]
    fn loop_is_unrolled_once() {
        let ev = [
            UsageEvent::LoopEnter,
            call("hasNext"),
            UsageEvent::LoopBody,
            call("next"),
            UsageEvent::LoopExit,
        ];
        let p = ControlTree::build(&ev).unwrap().normal_paths();
        assert_eq!(p.paths, vec![vec![1], vec![1, 3, 1]]);
    }

    #[test]
    fn catch_is_not_normal() {
        let ev = [
            UsageEvent::TryEnter,
            call("write"),
            UsageEvent::CatchEnter {
                exception_type: "IOException".into(),
            },
            call("log"),
            UsageEvent::FinallyEnter,
            call("close"),
            UsageEvent::TryExit,
        ];
        let p = ControlTree::build(&ev).unwrap().normal_paths();
        assert_eq!(p.paths, vec![vec![1, 5]]);
    }

    #[test]
    fn unbalanced_streams_are_rejected() {
        assert!(ControlTree::build(&[UsageEvent::BranchEnter, call("a")]).is_err());
        assert!(ControlTree::build(&[UsageEvent::LoopExit]).is_err());
        assert!(ControlTree::build(&[UsageEvent::TryEnter, UsageEvent::LoopExit]).is_err());
    }

    #[test]
    fn explosion_is_capped() {
        let mut ev = Vec::new();
        for _ in 0..10 {
            ev.extend([UsageEvent::BranchEnter, call("a"), UsageEvent::BranchExit]);
        }
        let p = ControlTree::build(&ev).unwrap().normal_paths();
        assert!(p.truncated);
        assert_eq!(p.paths.len(), MAX_PATHS);
    }
}
