//! Small synthetic knowledge bases with known relational structure.
//!
//! The `inverse-pair` pattern is exactly learnable by a model that can score
//! antisymmetric relations and is not learnable by a symmetric bilinear one,
//! which makes it a cheap stand-in for the symmetric-model failure seen on
//! WordNet-style data.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::store::{KnowledgeBase, NameTable, Triple, Vocab};

/// Minimum number of facts a synthetic KB must contain.
pub const MIN_TRIPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    /// Two relations: `(s, r0, o)` holds exactly when `(o, r1, s)` holds,
    /// with `r0` always pointing from the lower to the higher entity id.
    InversePair,
    /// One relation closed under argument swap.
    Symmetric,
    /// Independent facts over `relations` relations.
    Random { relations: usize },
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse-pair" => Ok(Pattern::InversePair),
            "symmetric" => Ok(Pattern::Symmetric),
            "random" => Ok(Pattern::Random { relations: 4 }),
            other => match other.strip_prefix("random:").map(str::parse) {
                Some(Ok(relations)) => Ok(Pattern::Random { relations }),
                _ => Err(Error::Config(format!("unknown pattern {other:?}"))),
            },
        }
    }
}

/// Generates a knowledge base over `e0..e{n-1}` with an 80/10/10 split.
///
/// For the paired patterns every held-out fact keeps its partner (inverse or
/// swapped fact) in train, and at most one fact per pair is held out.
pub fn generate_synthetic_kb(
    n_entities: usize,
    pattern: Pattern,
    density: f64,
    seed: u64,
) -> Result<KnowledgeBase> {
    if n_entities < 2 {
        return Err(Error::Config(format!("need at least 2 entities, got {n_entities}")));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Config(format!("density must be in (0, 1], got {density}")));
    }
    if let Pattern::Random { relations: 0 } = pattern {
        return Err(Error::Config("random pattern needs at least one relation".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_entities;

    let entities = NameTable::from_names((0..n).map(|i| format!("e{i}")))?;
    let n_rel = match pattern {
        Pattern::InversePair => 2,
        Pattern::Symmetric => 1,
        Pattern::Random { relations } => relations,
    };
    let relations = NameTable::from_names((0..n_rel).map(|i| format!("r{i}")))?;
    let vocab = Vocab::new(entities, relations);

    let (train, valid, test) = match pattern {
        Pattern::InversePair | Pattern::Symmetric => {
            let mut pairs = Vec::new();
            for s in 0..n {
                for o in s + 1..n {
                    if rng.gen_bool(density) {
                        pairs.push(match pattern {
                            Pattern::InversePair => [Triple::new(s, 0, o), Triple::new(o, 1, s)],
                            _ => [Triple::new(s, 0, o), Triple::new(o, 0, s)],
                        });
                    }
                }
            }
            let total = 2 * pairs.len();
            check_size(total)?;
            pairs.shuffle(&mut rng);
            let (n_valid, n_test) = held_out_sizes(total);
            let mut train = Vec::with_capacity(total);
            let mut valid = Vec::with_capacity(n_valid);
            let mut test = Vec::with_capacity(n_test);
            for (i, pair) in pairs.into_iter().enumerate() {
                let held = usize::from(rng.gen_bool(0.5));
                if i < n_valid {
                    valid.push(pair[held]);
                    train.push(pair[1 - held]);
                } else if i < n_valid + n_test {
                    test.push(pair[held]);
                    train.push(pair[1 - held]);
                } else {
                    train.extend(pair);
                }
            }
            (train, valid, test)
        }
        Pattern::Random { relations } => {
            let mut triples = Vec::new();
            for s in 0..n {
                for r in 0..relations {
                    for o in 0..n {
                        if s != o && rng.gen_bool(density) {
                            triples.push(Triple::new(s, r, o));
                        }
                    }
                }
            }
            check_size(triples.len())?;
            triples.shuffle(&mut rng);
            let (n_valid, n_test) = held_out_sizes(triples.len());
            let test = triples.split_off(triples.len() - n_test);
            let valid = triples.split_off(triples.len() - n_valid);
            (triples, valid, test)
        }
    };
    KnowledgeBase::new(vocab, train, valid, test)
}

fn check_size(total: usize) -> Result<()> {
    if total < MIN_TRIPLES {
        return Err(Error::Config(format!(
            "synthetic KB would contain {total} triples, need at least {MIN_TRIPLES}"
        )));
    }
    Ok(())
}

fn held_out_sizes(total: usize) -> (usize, usize) {
    let tenth = (total as f64 * 0.1).round() as usize;
    (tenth, tenth)
}
