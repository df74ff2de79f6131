//! Independent reference implementations shared by the integration tests.
//! Nothing here calls the ranking, fusion or gradient code under test.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};

use kbe_core::fusion::{FusionConfig, KbeNorm, ReRow, ReScoreTable, Scope, Strategy};
use kbe_core::model::{ModelKind, ModelParams, Norm};
use kbe_core::store::NameTable;
use kbe_core::trainer::{logistic_loss_grad, margin_loss_grad, GradSink, Scratch, SparseGrad, Table};
use kbe_core::{KnowledgeBase, TiePolicy, Triple, Vocab};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn vocab(n: usize, m: usize) -> Vocab {
    Vocab::new(
        NameTable::from_names((0..n).map(|i| format!("e{i}"))).unwrap(),
        NameTable::from_names((0..m).map(|i| format!("r{i}"))).unwrap(),
    )
}

/// Distinct random triples split into train/valid/test.
pub fn random_kb<R: Rng>(rng: &mut R, n: usize, m: usize, total: usize, n_test: usize) -> KnowledgeBase {
    let mut set = HashSet::new();
    let cap = n * n * m;
    while set.len() < total.min(cap) {
        set.insert(Triple::new(rng.gen_range(0..n), rng.gen_range(0..m), rng.gen_range(0..n)));
    }
    let mut all: Vec<Triple> = set.into_iter().collect();
    all.sort_by_key(|t| (t.s, t.r, t.o));
    all.shuffle(rng);
    let n_test = n_test.min(all.len());
    let test = all.split_off(all.len() - n_test);
    let n_valid = all.len() / 10;
    let valid = all.split_off(all.len() - n_valid);
    KnowledgeBase::new(vocab(n, m), all, valid, test).unwrap()
}

/// Entries uniform in [-1, 1], or drawn from {-1, 0, 1} to force score ties.
pub fn random_params<R: Rng>(rng: &mut R, kind: ModelKind, dim: usize, n: usize, m: usize, coarse: bool) -> ModelParams {
    let width = kind.row_width(dim);
    let mut draw = |len: usize| -> Vec<f64> {
        (0..len)
            .map(|_| {
                if coarse {
                    rng.gen_range(-1i32..=1) as f64
                } else {
                    rng.gen_range(-1.0..1.0)
                }
            })
            .collect()
    };
    let ents = draw(n * width);
    let rels = draw(m * width);
    ModelParams::from_tables(kind, dim, Norm::L1, ents, rels).unwrap()
}

/// Scores straight from the definitions, row by row.
pub fn oracle_score(p: &ModelParams, s: usize, r: usize, o: usize) -> f64 {
    let (es, wr, eo) = (p.entity(s), p.relation(r), p.entity(o));
    match p.kind() {
        ModelKind::TransE => {
            let diff = es.iter().zip(wr).zip(eo).map(|((a, b), c)| a + b - c);
            match p.norm() {
                Norm::L1 => -diff.map(f64::abs).sum::<f64>(),
                Norm::L2 => -diff.map(|d| d * d).sum::<f64>().sqrt(),
            }
        }
        ModelKind::DistMult => es.iter().zip(wr).zip(eo).map(|((a, b), c)| a * b * c).sum(),
        ModelKind::ComplEx => {
            let k = p.dim();
            let mut total = 0.0;
            for i in 0..k {
                // (a · b) · conj(c), real part
                let (ar, ai, br, bi, cr, ci) = (es[i], es[k + i], wr[i], wr[k + i], eo[i], eo[k + i]);
                let (pr, pi) = (ar * br - ai * bi, ar * bi + ai * br);
                total += pr * cr + pi * ci;
            }
            total
        }
    }
}

/// Rank by sorting the candidates, then locating the target's score block.
pub fn sorted_rank(scores: &[(usize, f64)], target: usize, policy: TiePolicy) -> f64 {
    let pivot = scores.iter().find(|(r, _)| *r == target).unwrap().1;
    let mut sorted: Vec<f64> = scores.iter().map(|&(_, s)| s).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let first = sorted.iter().position(|&s| s == pivot).unwrap();
    let block = sorted.iter().filter(|&&s| s == pivot).count();
    let others = (block - 1) as f64;
    let base = first as f64 + 1.0;
    match policy {
        TiePolicy::Optimistic => base,
        TiePolicy::Pessimistic => base + others,
        TiePolicy::Mean => base + others / 2.0,
    }
}

/// (raw, filtered) ranks of each test triple, scoring one relation at a time.
pub fn brute_force_ranks(p: &ModelParams, kb: &KnowledgeBase, policy: TiePolicy) -> Vec<(f64, f64)> {
    let known: Vec<Triple> = kb.train.iter().chain(&kb.valid).chain(&kb.test).copied().collect();
    kb.test
        .iter()
        .map(|t| {
            let all: Vec<(usize, f64)> =
                (0..p.n_relations()).map(|r| (r, p.score(Triple::new(t.s, r, t.o)).unwrap())).collect();
            let kept: Vec<(usize, f64)> = all
                .iter()
                .copied()
                .filter(|&(r, _)| r == t.r || !known.contains(&Triple::new(t.s, r, t.o)))
                .collect();
            (sorted_rank(&all, t.r, policy), sorted_rank(&kept, t.r, policy))
        })
        .collect()
}

pub fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Random extractor table over the first `n` entities of `vocab`, with a
/// handful of rows naming unknown entities or relations.
pub fn random_re_table<R: Rng>(rng: &mut R, vocab: &Vocab, rows: usize) -> ReScoreTable {
    let n = vocab.n_entities();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    while out.len() < rows {
        let (s, o) = (rng.gen_range(0..n + 1), rng.gen_range(0..n));
        if !seen.insert((s, o)) {
            continue;
        }
        let name = |i: usize| vocab.entities.name(i).map_or_else(|| "ghost".to_string(), str::to_string);
        let mut scores = BTreeMap::new();
        scores.insert("NA".to_string(), rng.gen_range(0.0..1.0));
        for rel in vocab.relations.names() {
            if rng.gen_bool(0.8) {
                scores.insert(rel.clone(), rng.gen_range(0.0..1.0));
            }
        }
        if rng.gen_bool(0.1) {
            scores.insert("unseen".to_string(), rng.gen_range(0.0..1.0));
        }
        out.push(ReRow {
            s: name(s),
            o: name(o),
            scores,
            line: 0,
        });
    }
    ReScoreTable::new(out).unwrap()
}

fn oracle_norm(raw: &[f64], method: KbeNorm) -> Vec<f64> {
    match method {
        KbeNorm::None => raw.to_vec(),
        KbeNorm::Sigmoid => raw.iter().map(|x| 1.0 / (1.0 + (-x).exp())).collect(),
        KbeNorm::MinMax => {
            let lo = raw.iter().cloned().fold(f64::MAX, f64::min);
            let hi = raw.iter().cloned().fold(f64::MIN, f64::max);
            raw.iter().map(|x| if hi == lo { 0.5 } else { (x - lo) / (hi - lo) }).collect()
        }
    }
}

fn oracle_softmax(raw: &[f64]) -> Vec<f64> {
    let z: f64 = raw.iter().map(|x| x.exp()).sum();
    raw.iter().map(|x| x.exp() / z).collect()
}

fn oracle_combine(s: f64, f: f64, c: &FusionConfig) -> f64 {
    let a = c.alpha;
    if a == 1.0 {
        return s;
    }
    match c.strategy {
        Strategy::Weighted | Strategy::SoftmaxWeighted => a * s + (1.0 - a) * f,
        Strategy::Geometric => s.powf(a) * f.powf(1.0 - a),
        Strategy::Harmonic => {
            if s == 0.0 || f == 0.0 {
                0.0
            } else {
                1.0 / (a / s + (1.0 - a) / f)
            }
        }
    }
}

/// Highest score first; equal scores resolved by the smaller name.
fn oracle_best(cands: &[(String, f64)]) -> (String, f64) {
    let mut sorted = cands.to_vec();
    sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    sorted[0].clone()
}

/// Naive fusion: per row, predict, composite, and collect non-NA winners.
pub fn brute_force_fusion(
    table: &ReScoreTable,
    p: &ModelParams,
    vocab: &Vocab,
    c: &FusionConfig,
) -> Vec<(String, String, String, f64)> {
    let mut out = Vec::new();
    for row in &table.rows {
        let (Some(s), Some(o)) = (vocab.entities.id(&row.s), vocab.entities.id(&row.o)) else {
            continue;
        };
        let raw: Vec<f64> = (0..p.n_relations()).map(|r| oracle_score(p, s, r, o)).collect();
        let kbe = if c.strategy == Strategy::SoftmaxWeighted {
            oracle_softmax(&raw)
        } else {
            oracle_norm(&raw, c.kbe_norm)
        };
        let f = |rel: &str| match vocab.relations.id(rel) {
            Some(r) if rel != "NA" => kbe[r],
            _ => 0.5,
        };
        let cands: Vec<(String, f64)> = row.scores.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let winner = match c.scope {
            Scope::TopNonNa => {
                let (rel, v) = oracle_best(&cands);
                let composite = oracle_combine(v, f(&rel), c);
                (rel, composite)
            }
            Scope::AllNonNa => {
                let fused: Vec<(String, f64)> = cands
                    .iter()
                    .map(|(k, v)| (k.clone(), if k == "NA" { *v } else { oracle_combine(*v, f(k), c) }))
                    .collect();
                oracle_best(&fused)
            }
            Scope::All => {
                let fused: Vec<(String, f64)> =
                    cands.iter().map(|(k, v)| (k.clone(), oracle_combine(*v, f(k), c))).collect();
                oracle_best(&fused)
            }
        };
        if winner.0 != "NA" {
            out.push((row.s.clone(), row.o.clone(), winner.0, winner.1));
        }
    }
    out.sort_by(|a, b| {
        b.3.partial_cmp(&a.3)
            .unwrap()
            .then_with(|| (&a.0, &a.1, &a.2).cmp(&(&b.0, &b.1, &b.2)))
    });
    out
}

/// (recall, precision) after each prediction, and the trapezoid area from
/// (0, first precision).
pub fn brute_force_curve(correct: &[bool], gold: usize) -> (Vec<(f64, f64)>, f64) {
    let mut points = Vec::new();
    for k in 1..=correct.len() {
        let hits = correct[..k].iter().filter(|&&c| c).count() as f64;
        points.push((hits / gold as f64, hits / k as f64));
    }
    let mut area = 0.0;
    for (i, &(r, p)) in points.iter().enumerate() {
        let (r0, p0) = if i == 0 { (0.0, p) } else { points[i - 1] };
        area += (r - r0) * (p + p0) / 2.0;
    }
    (points, area)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub struct GradientOutcome {
    pub checked: usize,
    pub excluded: usize,
    pub failures: usize,
    pub max_rel: f64,
}

const FD_STEP: f64 = 1e-5;
const KINK: f64 = 1e-4;
/// Denominator floor so that coordinates with a true zero derivative are
/// judged on absolute error (FD round-off is around 1e-10 here).
pub const REL_FLOOR: f64 = 1e-4;

fn residual_near_kink(p: &ModelParams, triples: &[Triple], table: Table, row: usize, k: usize) -> bool {
    if p.kind() != ModelKind::TransE || p.norm() != Norm::L1 {
        return false;
    }
    triples.iter().any(|t| {
        let touches = match table {
            Table::Entity => t.s == row || t.o == row,
            Table::Relation => t.r == row,
        };
        touches && (p.entity(t.s)[k] + p.relation(t.r)[k] - p.entity(t.o)[k]).abs() < KINK
    })
}

fn perturbed(p: &ModelParams, table: Table, row: usize, k: usize, delta: f64) -> ModelParams {
    let mut q = p.clone();
    let slot = match table {
        Table::Entity => &mut q.entity_mut(row)[k],
        Table::Relation => &mut q.relation_mut(row)[k],
    };
    *slot += delta;
    q
}

/// Compares `analytic` (per touched row) against central differences of `f`
/// over every coordinate of those rows.
fn compare(
    p: &ModelParams,
    triples: &[Triple],
    analytic: &SparseGrad,
    f: &dyn Fn(&ModelParams) -> f64,
    out: &mut GradientOutcome,
) {
    for (table, row, grad) in analytic.rows() {
        for (k, &a) in grad.iter().enumerate() {
            if residual_near_kink(p, triples, table, row, k) {
                out.excluded += 1;
                continue;
            }
            let up = f(&perturbed(p, table, row, k, FD_STEP));
            let down = f(&perturbed(p, table, row, k, -FD_STEP));
            let numeric = (up - down) / (2.0 * FD_STEP);
            let rel = relative_error(a, numeric, REL_FLOOR);
            out.checked += 1;
            out.max_rel = out.max_rel.max(rel);
            if rel >= 1e-5 {
                out.failures += 1;
            }
        }
    }
}

/// Score and loss gradients of one model against finite differences, over
/// `draws` random parameter sets.
pub fn gradient_suite<R: Rng>(rng: &mut R, kind: ModelKind, norm: Norm, draws: usize) -> GradientOutcome {
    let mut out = GradientOutcome {
        checked: 0,
        excluded: 0,
        failures: 0,
        max_rel: 0.0,
    };
    let (n, m) = (6, 3);
    for _ in 0..draws {
        let dim = rng.gen_range(1..=6);
        let p = random_params(rng, kind, dim, n, m, false).with_norm(norm);
        let t = Triple::new(rng.gen_range(0..n), rng.gen_range(0..m), rng.gen_range(0..n));

        // the score, as a function of the whole parameter table
        let g = p.score_gradients(t).unwrap();
        let mut score_grad = SparseGrad::new();
        score_grad.add(Table::Entity, t.s, &g.subject);
        score_grad.add(Table::Relation, t.r, &g.relation);
        score_grad.add(Table::Entity, t.o, &g.object);
        compare(&p, &[t], &score_grad, &|q| oracle_score(q, t.s, t.r, t.o), &mut out);

        let mut scratch = Scratch::new(p.width());
        let mut loss_grad = SparseGrad::new();
        if kind == ModelKind::TransE {
            let neg = Triple::new(rng.gen_range(0..n), t.r, rng.gen_range(0..n));
            let margin = rng.gen_range(0.5..4.0);
            let hinge = |q: &ModelParams| {
                (margin - oracle_score(q, t.s, t.r, t.o) + oracle_score(q, neg.s, neg.r, neg.o)).max(0.0)
            };
            if hinge(&p).abs() < KINK {
                continue;
            }
            margin_loss_grad(&p, t, neg, margin, &mut scratch, &mut loss_grad);
            compare(&p, &[t, neg], &loss_grad, &hinge, &mut out);
        } else {
            let label = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let lambda = rng.gen_range(0.0..0.1);
            let loss = |q: &ModelParams| {
                let z = -label * oracle_score(q, t.s, t.r, t.o);
                let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
                (1.0 + z.exp()).ln() + lambda * (sq(q.entity(t.s)) + sq(q.relation(t.r)) + sq(q.entity(t.o)))
            };
            logistic_loss_grad(&p, t, label, lambda, &mut loss_grad);
            compare(&p, &[t], &loss_grad, &loss, &mut out);
        }
    }
    out
}
