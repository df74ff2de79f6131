//! Negative triples by corrupting the subject, object or relation slot.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::{KnowledgeBase, Triple};

/// Attempts before filtered sampling gives up.
pub const MAX_FILTER_ATTEMPTS: usize = 100;

/// Relative odds of corrupting each slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionWeights {
    pub subject: f64,
    pub object: f64,
    pub relation: f64,
}

impl Default for CorruptionWeights {
    fn default() -> Self {
        Self {
            subject: 1.0,
            object: 1.0,
            relation: 1.0,
        }
    }
}

impl CorruptionWeights {
    pub fn new(subject: f64, object: f64, relation: f64) -> Self {
        Self {
            subject,
            object,
            relation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let w = [self.subject, self.object, self.relation];
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) || w.iter().all(|x| *x == 0.0) {
            return Err(Error::Config(format!(
                "corruption weights must be nonnegative and not all zero, got {}",
                self
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for CorruptionWeights {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.subject, self.object, self.relation)
    }
}

impl std::str::FromStr for CorruptionWeights {
    type Err = Error;

    /// Parses `subject:object:relation`, e.g. `1:1:1`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(':')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("bad corruption weights {s:?}")))?;
        match parts[..] {
            [subject, object, relation] => {
                let w = Self::new(subject, object, relation);
                w.validate()?;
                Ok(w)
            }
            _ => Err(Error::Config(format!("bad corruption weights {s:?}, want s:o:r"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Subject,
    Object,
    Relation,
}

/// Draws corrupted triples for one knowledge base.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    n_entities: usize,
    n_relations: usize,
    // cumulative slot weights; zero for slots with a single possible value
    cumulative: [f64; 3],
    train: Option<HashSet<Triple>>,
}

impl NegativeSampler {
    /// With `filtered` set, candidates present in `kb.train` are redrawn.
    pub fn new(kb: &KnowledgeBase, weights: CorruptionWeights, filtered: bool) -> Result<Self> {
        let train = filtered.then(|| kb.train.iter().copied().collect());
        Self::with_sizes(kb.vocab.n_entities(), kb.vocab.n_relations(), weights, train)
    }

    pub fn with_sizes(
        n_entities: usize,
        n_relations: usize,
        weights: CorruptionWeights,
        train: Option<HashSet<Triple>>,
    ) -> Result<Self> {
        weights.validate()?;
        let usable = |w: f64, size: usize| if size >= 2 { w } else { 0.0 };
        let s = usable(weights.subject, n_entities);
        let o = usable(weights.object, n_entities);
        let r = usable(weights.relation, n_relations);
        if s + o + r == 0.0 {
            return Err(Error::Sampling(format!(
                "no slot can be corrupted with {n_entities} entities, {n_relations} relations and weights {weights}"
            )));
        }
        Ok(Self {
            n_entities,
            n_relations,
            cumulative: [s, s + o, s + o + r],
            train,
        })
    }

    pub fn choose_slot<R: Rng + ?Sized>(&self, rng: &mut R) -> Slot {
        let x = rng.gen::<f64>() * self.cumulative[2];
        if x < self.cumulative[0] {
            Slot::Subject
        } else if x < self.cumulative[1] {
            Slot::Object
        } else {
            Slot::Relation
        }
    }

    /// A triple differing from `pos` in exactly one slot.
    pub fn sample<R: Rng + ?Sized>(&self, pos: Triple, rng: &mut R) -> Result<Triple> {
        let attempts = if self.train.is_some() { MAX_FILTER_ATTEMPTS } else { 1 };
        for _ in 0..attempts {
            let neg = self.corrupt(pos, rng);
            match &self.train {
                Some(train) if train.contains(&neg) => continue,
                _ => return Ok(neg),
            }
        }
        Err(Error::Sampling(format!(
            "no negative outside train for {pos:?} after {MAX_FILTER_ATTEMPTS} attempts"
        )))
    }

    fn corrupt<R: Rng + ?Sized>(&self, pos: Triple, rng: &mut R) -> Triple {
        let mut neg = pos;
        match self.choose_slot(rng) {
            Slot::Subject => neg.s = other_than(pos.s, self.n_entities, rng),
            Slot::Object => neg.o = other_than(pos.o, self.n_entities, rng),
            Slot::Relation => neg.r = other_than(pos.r, self.n_relations, rng),
        }
        neg
    }
}

/// Uniform over `0..size` minus `value`.
fn other_than<R: Rng + ?Sized>(value: usize, size: usize, rng: &mut R) -> usize {
    let x = rng.gen_range(0..size - 1);
    if x >= value {
        x + 1
    } else {
        x
    }
}
