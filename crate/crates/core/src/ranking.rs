//! Relation prediction: rank the true relation of `(s, ?, o)` among all
//! relations, under the raw and filtered regimes, and aggregate MRR and
//! Hits@1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterIndex;
use crate::model::ModelParams;
use crate::store::{KnowledgeBase, Split, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Raw,
    Filter,
}

/// How candidates scoring exactly like the true relation count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    /// Half of the ties rank above.
    #[default]
    Mean,
    /// No tie ranks above.
    Optimistic,
    /// Every tie ranks above.
    Pessimistic,
}

impl std::str::FromStr for TiePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(TiePolicy::Mean),
            "optimistic" => Ok(TiePolicy::Optimistic),
            "pessimistic" => Ok(TiePolicy::Pessimistic),
            _ => Err(Error::Config(format!("unknown tie policy {s:?}"))),
        }
    }
}

/// Rank of `scores[target]` among all entries except those in `excluded`
/// (ascending ids; `target` itself is never excluded).
pub fn rank_in_scores(scores: &[f64], target: usize, excluded: &[usize], policy: TiePolicy) -> f64 {
    let pivot = scores[target];
    let (mut greater, mut ties) = (0usize, 0usize);
    for (i, &score) in scores.iter().enumerate() {
        if i == target || excluded.binary_search(&i).is_ok() {
            continue;
        }
        if score > pivot {
            greater += 1;
        } else if score == pivot {
            ties += 1;
        }
    }
    let tie_term = match policy {
        TiePolicy::Mean => ties as f64 / 2.0,
        TiePolicy::Optimistic => 0.0,
        TiePolicy::Pessimistic => ties as f64,
    };
    1.0 + greater as f64 + tie_term
}

/// Rank of `t.r` among the relations scored for `(t.s, t.o)`.
pub fn rank_relation(
    params: &ModelParams,
    filter: &FilterIndex,
    t: Triple,
    regime: Regime,
    policy: TiePolicy,
) -> Result<f64> {
    params.check_triple(t)?;
    let scores = params.score_all_relations(t.s, t.o)?;
    let excluded = match regime {
        Regime::Raw => &[][..],
        Regime::Filter => filter.relations(t.s, t.o),
    };
    Ok(rank_in_scores(&scores, t.r, excluded, policy))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub triple: Triple,
    pub raw_rank: f64,
    pub filtered_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mrr_raw: f64,
    pub mrr_filtered: f64,
    pub hits1_raw: f64,
    pub hits1_filtered: f64,
    pub n_triples: usize,
    pub tie_policy: TiePolicy,
    pub ranks: Vec<RankResult>,
}

impl EvalReport {
    /// Aggregates ranks in the given order.
    pub fn from_ranks(ranks: Vec<RankResult>, tie_policy: TiePolicy) -> Self {
        let n = ranks.len();
        let mean = |f: &dyn Fn(&RankResult) -> f64| {
            if n == 0 {
                0.0
            } else {
                ranks.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let hit = |rank: f64| if rank <= 1.0 { 1.0 } else { 0.0 };
        Self {
            mrr_raw: mean(&|r| 1.0 / r.raw_rank),
            mrr_filtered: mean(&|r| 1.0 / r.filtered_rank),
            hits1_raw: mean(&|r| hit(r.raw_rank)),
            hits1_filtered: mean(&|r| hit(r.filtered_rank)),
            n_triples: n,
            tie_policy,
            ranks,
        }
    }

    /// `dataset, model, MRR-filter, MRR-raw, Hits@1-filter, Hits@1-raw`.
    pub fn tsv_line(&self, dataset: &str, model: &str) -> String {
        format!(
            "{dataset}\t{model}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            self.mrr_filtered, self.mrr_raw, self.hits1_filtered, self.hits1_raw
        )
    }
}

/// Ranks every triple of `triples` (in parallel, aggregated in input order).
pub fn evaluate_triples(
    params: &ModelParams,
    filter: &FilterIndex,
    triples: &[Triple],
    policy: TiePolicy,
) -> Result<EvalReport> {
    let ranks = triples
        .par_iter()
        .map_init(Vec::new, |scores, &t| {
            params.check_triple(t)?;
            params.score_all_relations_into(t.s, t.o, scores)?;
            Ok(RankResult {
                triple: t,
                raw_rank: rank_in_scores(scores, t.r, &[], policy),
                filtered_rank: rank_in_scores(scores, t.r, filter.relations(t.s, t.o), policy),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_ranks(ranks, policy))
}

/// Relation-prediction metrics for one split of `kb`.
pub fn evaluate_relation_prediction(
    params: &ModelParams,
    kb: &KnowledgeBase,
    split: Split,
    policy: TiePolicy,
) -> Result<EvalReport> {
    check_binding(params, kb)?;
    let filter = FilterIndex::build(kb);
    evaluate_triples(params, &filter, kb.split(split), policy)
}

/// Errors unless `params` has one row per vocabulary entry.
pub fn check_binding(params: &ModelParams, kb: &KnowledgeBase) -> Result<()> {
    let (n, m) = (kb.vocab.n_entities(), kb.vocab.n_relations());
    if params.n_entities() != n || params.n_relations() != m {
        return Err(Error::Binding(format!(
            "model has {} entities and {} relations, knowledge base has {n} and {m}",
            params.n_entities(),
            params.n_relations()
        )));
    }
    Ok(())
}
