//! Known-true relations per entity pair, used by the filtered ranking regime.

use std::collections::HashMap;

use crate::store::KnowledgeBase;

/// Maps `(s, o)` to the sorted relation ids seen with that pair in any split.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterIndex {
    pairs: HashMap<(usize, usize), Vec<usize>>,
}

impl FilterIndex {
    pub fn build(kb: &KnowledgeBase) -> Self {
        let mut pairs: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for t in kb.all_triples() {
            pairs.entry((t.s, t.o)).or_default().push(t.r);
        }
        for rels in pairs.values_mut() {
            rels.sort_unstable();
            rels.dedup();
        }
        Self { pairs }
    }

    /// Relations known to hold between `s` and `o`, ascending.
    pub fn relations(&self, s: usize, o: usize) -> &[usize] {
        self.pairs.get(&(s, o)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, s: usize, r: usize, o: usize) -> bool {
        self.relations(s, o).binary_search(&r).is_ok()
    }

    pub fn n_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}
