use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{ConceptId, LexiconError};

/// Hypernymy graph over concept ids. Parent links form a DAG; a node without
/// parents is a root. Depth is the length of the longest parent chain down
/// from a root, with roots at depth 1, so a strict ancestor is always
/// shallower than its descendants.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Taxonomy {
    parents: BTreeMap<ConceptId, BTreeSet<ConceptId>>,
    depth: BTreeMap<ConceptId, u32>,
}

impl Taxonomy {
    /// Builds a taxonomy, rejecting dangling parents and cycles.
    pub fn new(parents: BTreeMap<ConceptId, BTreeSet<ConceptId>>) -> Result<Self, LexiconError> {
        for (child, ps) in &parents {
            for p in ps {
                if !parents.contains_key(p) {
                    return Err(LexiconError::DanglingParent {
                        concept: *child,
                        parent: *p,
                    });
                }
            }
        }
        if let Some(cycle) = find_cycle(&parents) {
            return Err(LexiconError::Cycle { concepts: cycle });
        }
        let mut tax = Taxonomy {
            parents,
            depth: BTreeMap::new(),
        };
        tax.depth = compute_depths(&tax.parents);
        Ok(tax)
    }

    /// Adds a fresh leaf. Existing depths are unaffected.
    pub(crate) fn add_leaf(&mut self, id: ConceptId, parents: BTreeSet<ConceptId>) {
        debug_assert!(!self.parents.contains_key(&id));
        let d = parents
            .iter()
            .map(|p| self.depth[p])
            .max()
            .map_or(1, |m| m + 1);
        self.parents.insert(id, parents);
        self.depth.insert(id, d);
    }

    pub fn contains(&self, id: ConceptId) -> bool {
        self.parents.contains_key(&id)
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ConceptId> + '_ {
        self.parents.keys().copied()
    }

    pub fn parents(&self, id: ConceptId) -> Result<&BTreeSet<ConceptId>, LexiconError> {
        self.parents.get(&id).ok_or(LexiconError::UnknownConcept(id))
    }

    pub fn roots(&self) -> impl Iterator<Item = ConceptId> + '_ {
        self.parents
            .iter()
            .filter(|(_, ps)| ps.is_empty())
            .map(|(id, _)| *id)
    }

    pub fn depth(&self, id: ConceptId) -> Result<u32, LexiconError> {
        self.depth
            .get(&id)
            .copied()
            .ok_or(LexiconError::UnknownConcept(id))
    }

    /// Reflexive ancestor set.
    pub fn ancestors(&self, id: ConceptId) -> Result<BTreeSet<ConceptId>, LexiconError> {
        self.parents(id)?;
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([id]);
        while let Some(c) = queue.pop_front() {
            if seen.insert(c) {
                queue.extend(self.parents[&c].iter().copied());
            }
        }
        Ok(seen)
    }

    /// Reflexive: `is_ancestor(c, c)` holds.
    pub fn is_ancestor(&self, ancestor: ConceptId, descendant: ConceptId) -> Result<bool, LexiconError> {
        self.parents(ancestor)?;
        self.parents(descendant)?;
        if ancestor == descendant {
            return Ok(true);
        }
        let target_depth = self.depth[&ancestor];
        let mut seen = BTreeSet::new();
        let mut stack = vec![descendant];
        while let Some(c) = stack.pop() {
            if c == ancestor {
                return Ok(true);
            }
            if !seen.insert(c) {
                continue;
            }
            // depth strictly decreases towards roots
            stack.extend(
                self.parents[&c]
                    .iter()
                    .copied()
                    .filter(|p| self.depth[p] >= target_depth),
            );
        }
        Ok(false)
    }

    pub fn comparable(&self, a: ConceptId, b: ConceptId) -> Result<bool, LexiconError> {
        Ok(self.is_ancestor(a, b)? || self.is_ancestor(b, a)?)
    }

    /// Deepest common ancestor; ties go to the smallest id. `None` when the
    /// two concepts live in disjoint hierarchies.
    pub fn lowest_common_ancestor(
        &self,
        a: ConceptId,
        b: ConceptId,
    ) -> Result<Option<ConceptId>, LexiconError> {
        let left = self.ancestors(a)?;
        let right = self.ancestors(b)?;
        Ok(left
            .intersection(&right)
            .copied()
            .max_by(|x, y| self.depth[x].cmp(&self.depth[y]).then(y.cmp(x))))
    }

    /// Wu–Palmer similarity `2·depth(lca) / (depth(a) + depth(b))`, 0 when
    /// there is no common ancestor.
    pub fn similarity(&self, a: ConceptId, b: ConceptId) -> Result<f64, LexiconError> {
        if a == b {
            self.parents(a)?;
            return Ok(1.0);
        }
        let Some(lca) = self.lowest_common_ancestor(a, b)? else {
            return Ok(0.0);
        };
        let num = 2.0 * f64::from(self.depth[&lca]);
        let den = f64::from(self.depth[&a] + self.depth[&b]);
        Ok(num / den)
    }
}

fn compute_depths(parents: &BTreeMap<ConceptId, BTreeSet<ConceptId>>) -> BTreeMap<ConceptId, u32> {
    fn visit(
        id: ConceptId,
        parents: &BTreeMap<ConceptId, BTreeSet<ConceptId>>,
        memo: &mut BTreeMap<ConceptId, u32>,
    ) -> u32 {
        if let Some(d) = memo.get(&id) {
            return *d;
        }
        let d = parents[&id]
            .iter()
            .map(|p| visit(*p, parents, memo))
            .max()
            .map_or(1, |m| m + 1);
        memo.insert(id, d);
        d
    }
    let mut memo = BTreeMap::new();
    for id in parents.keys() {
        visit(*id, parents, &mut memo);
    }
    memo
}

/// Returns the concepts along one parent cycle, if any.
fn find_cycle(parents: &BTreeMap<ConceptId, BTreeSet<ConceptId>>) -> Option<Vec<ConceptId>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut marks: BTreeMap<ConceptId, Mark> = BTreeMap::new();
    for &start in parents.keys() {
        if marks.contains_key(&start) {
            continue;
        }
        // iterative DFS keeping the current path
        let mut path: Vec<ConceptId> = Vec::new();
        let mut stack: Vec<(ConceptId, Vec<ConceptId>)> = vec![(start, parents[&start].iter().copied().collect())];
        marks.insert(start, Mark::Open);
        path.push(start);
        while let Some((node, pending)) = stack.last_mut() {
            if let Some(next) = pending.pop() {
                match marks.get(&next) {
                    Some(Mark::Open) => {
                        let pos = path.iter().position(|c| *c == next).unwrap();
                        let mut cycle = path[pos..].to_vec();
                        cycle.sort();
                        return Some(cycle);
                    }
                    Some(Mark::Done) => {}
                    None => {
                        marks.insert(next, Mark::Open);
                        path.push(next);
                        stack.push((next, parents[&next].iter().copied().collect()));
                    }
                }
            } else {
                marks.insert(*node, Mark::Done);
                path.pop();
                stack.pop();
            }
        }
    }
    None
}
