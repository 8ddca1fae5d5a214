//! Persistent records of the decision indicators behind a message.

use std::sync::Arc;

use crate::factor::VarId;
use crate::model::Assignment;
use crate::Error;

#[derive(Debug)]
struct Join {
    tags: Vec<(VarId, usize)>,
    parts: Vec<Trace>,
}

/// Decision states committed in a message's subtree. Combining traces is
/// O(children); the full assignment is materialized only on demand.
#[derive(Clone, Debug, Default)]
pub struct Trace(Option<Arc<Join>>);

impl Trace {
    pub fn empty() -> Trace {
        Trace(None)
    }

    pub fn join(tags: Vec<(VarId, usize)>, parts: Vec<Trace>) -> Trace {
        let mut live: Vec<Trace> = parts.into_iter().filter(|p| p.0.is_some()).collect();
        if tags.is_empty() {
            match live.len() {
                0 => return Trace(None),
                1 => return live.pop().expect("one part"),
                _ => {}
            }
        }
        Trace(Some(Arc::new(Join { tags, parts: live })))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_none()
    }

    /// All committed states; errors if one variable carries two states.
    pub fn flatten(&self) -> Result<Assignment, Error> {
        let mut out = Assignment::new();
        let mut stack: Vec<&Join> = self.0.as_deref().into_iter().collect();
        while let Some(j) = stack.pop() {
            for &(v, s) in &j.tags {
                if let Some(prev) = out.insert(v, s) {
                    if prev != s {
                        return Err(Error::TraceCollision(v));
                    }
                }
            }
            stack.extend(j.parts.iter().filter_map(|p| p.0.as_deref()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joins_flatten_to_union() {
        let a = Trace::join(vec![(VarId(0), 1)], vec![]);
        let b = Trace::join(vec![(VarId(2), 0)], vec![]);
        let c = Trace::join(vec![(VarId(1), 3)], vec![a.clone(), b, Trace::empty()]);
        let flat = c.flatten().unwrap();
        assert_eq!(flat.len(), 3);
        assert_eq!(flat[&VarId(1)], 3);
        // a join with nothing new reuses its only part
        let same = Trace::join(vec![], vec![a.clone()]);
        assert!(Arc::ptr_eq(same.0.as_ref().unwrap(), a.0.as_ref().unwrap()));
        assert!(Trace::join(vec![], vec![Trace::empty()]).is_empty());
    }

    #[test]
    fn conflicting_states_are_reported() {
        let a = Trace::join(vec![(VarId(0), 1)], vec![]);
        let b = Trace::join(vec![(VarId(0), 0)], vec![]);
        assert_eq!(Trace::join(vec![], vec![a, b]).flatten(), Err(Error::TraceCollision(VarId(0))));
    }
}
