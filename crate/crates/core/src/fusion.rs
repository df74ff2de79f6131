//! Late fusion of relation-extraction scores with embedding scores.
//!
//! Each entity pair carries per-relation scores from an external extractor,
//! including the `NA` ("no relation") marker. The pair's prediction is the
//! argmax; non-NA predictions are re-scored by combining the extractor score
//! with the normalized embedding score of the same relation, and the ranked
//! predictions are swept into a precision–recall curve.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::store::Vocab;

pub const NA: &str = "NA";

/// Embedding plausibility given to `NA` and to relations unknown to the model.
pub const KBE_MIDPOINT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReRow {
    pub s: String,
    pub o: String,
    pub scores: BTreeMap<String, f64>,
    /// 1-based line in the source file, 0 when built in memory.
    #[serde(skip)]
    pub line: usize,
}

/// Extractor scores, one row per distinct entity pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReScoreTable {
    pub rows: Vec<ReRow>,
}

impl ReScoreTable {
    pub fn new(rows: Vec<ReRow>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, row) in rows.iter().enumerate() {
            let line = if row.line == 0 { i + 1 } else { row.line };
            let fail = |message: String| Err(Error::Format { line, message });
            if !row.scores.contains_key(NA) {
                return fail(format!("pair ({}, {}) has no {NA} score", row.s, row.o));
            }
            if let Some((rel, v)) = row.scores.iter().find(|(_, v)| !v.is_finite()) {
                return fail(format!("non-finite score {v} for {rel}"));
            }
            if !seen.insert((row.s.as_str(), row.o.as_str())) {
                return fail(format!("duplicate pair ({}, {})", row.s, row.o));
            }
        }
        Ok(Self { rows })
    }

    /// Parses JSON Lines: `{"s": .., "o": .., "scores": {"NA": .., ..}}`.
    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::Format {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut row: ReRow = serde_json::from_str(&line).map_err(|e| Error::Format {
                line: line_no,
                message: e.to_string(),
            })?;
            row.line = line_no;
            rows.push(row);
        }
        Self::new(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(file))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// `α·s + (1-α)·f`
    Weighted,
    /// `s^α · f^(1-α)`
    Geometric,
    /// `1 / (α/s + (1-α)/f)`
    Harmonic,
    /// Weighted, with the embedding scores softmax-normalized over relations.
    SoftmaxWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    /// Re-score only the pair's argmax, when it is not NA.
    TopNonNa,
    /// Re-score every non-NA relation, then compare against the raw NA score.
    AllNonNa,
    /// Re-score every relation including NA.
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KbeNorm {
    MinMax,
    Sigmoid,
    None,
}

macro_rules! parse_enum {
    ($ty:ty, $what:literal, { $($name:literal => $val:expr),+ $(,)? }) => {
        impl std::str::FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($val),)+
                    _ => Err(Error::Config(format!(concat!("unknown ", $what, " {:?}"), s))),
                }
            }
        }
    };
}

parse_enum!(Strategy, "fusion strategy", {
    "weighted" => Strategy::Weighted,
    "geometric" => Strategy::Geometric,
    "harmonic" => Strategy::Harmonic,
    "softmax-weighted" => Strategy::SoftmaxWeighted,
});
parse_enum!(Scope, "fusion scope", {
    "top-non-na" => Scope::TopNonNa,
    "top-nonNA" => Scope::TopNonNa,
    "all-non-na" => Scope::AllNonNa,
    "all-nonNA" => Scope::AllNonNa,
    "all" => Scope::All,
});
parse_enum!(KbeNorm, "normalization", {
    "minmax" => KbeNorm::MinMax,
    "sigmoid" => KbeNorm::Sigmoid,
    "none" => KbeNorm::None,
});

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub alpha: f64,
    pub strategy: Strategy,
    pub scope: Scope,
    pub kbe_norm: KbeNorm,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            strategy: Strategy::Weighted,
            scope: Scope::TopNonNa,
            kbe_norm: KbeNorm::MinMax,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1], got {}", self.alpha)));
        }
        if self.needs_unit_operands() && self.kbe_norm == KbeNorm::None {
            return Err(Error::Config(format!(
                "{:?} fusion needs normalized embedding scores",
                self.strategy
            )));
        }
        Ok(())
    }

    fn needs_unit_operands(&self) -> bool {
        matches!(self.strategy, Strategy::Geometric | Strategy::Harmonic)
    }
}

/// A non-NA prediction for one entity pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPrediction {
    pub s: String,
    pub o: String,
    pub relation: String,
    pub score: f64,
    pub gold: bool,
}

/// Argmax over all relations including NA; ties go to the
/// lexicographically smallest name.
pub fn predict_relation(row: &ReRow) -> Result<&str> {
    argmax(row.scores.iter().map(|(k, v)| (k.as_str(), *v)))
        .map(|(name, _)| name)
        .ok_or_else(|| Error::Format {
        line: row.line,
        message: format!("pair ({}, {}) has no scores", row.s, row.o),
    })
}

fn argmax<'a>(items: impl Iterator<Item = (&'a str, f64)>) -> Option<(&'a str, f64)> {
    let mut best: Option<(&str, f64)> = None;
    for (name, v) in items {
        best = match best {
            Some((b, bv)) if bv > v || (bv == v && b <= name) => Some((b, bv)),
            _ => Some((name, v)),
        };
    }
    best
}

/// Maps embedding scores into `[0, 1]` (identity for [`KbeNorm::None`]).
/// A constant list under min-max maps to all 0.5.
pub fn normalize_kbe(scores: &[f64], method: KbeNorm) -> Vec<f64> {
    match method {
        KbeNorm::None => scores.to_vec(),
        KbeNorm::Sigmoid => scores.iter().map(|&x| crate::trainer::steps::sigmoid(x)).collect(),
        KbeNorm::MinMax => {
            let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                scores.iter().map(|&x| (x - lo) / (hi - lo)).collect()
            } else {
                vec![0.5; scores.len()]
            }
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&x| (x - hi).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Combines an extractor score with an embedding score.
///
/// Geometric and harmonic expect operands in `[0, 1]`. An operand whose weight
/// is zero drops out, so `α = 1` returns `s_re` for every strategy. The
/// harmonic mean is 0 when a weighted operand is 0.
pub fn composite_score(s_re: f64, f_kbe: f64, config: &FusionConfig) -> f64 {
    let a = config.alpha;
    let b = 1.0 - a;
    match config.strategy {
        Strategy::Weighted | Strategy::SoftmaxWeighted => {
            if b == 0.0 {
                s_re
            } else {
                a * s_re + b * f_kbe
            }
        }
        Strategy::Geometric => {
            if b == 0.0 {
                s_re
            } else {
                s_re.powf(a) * f_kbe.powf(b)
            }
        }
        Strategy::Harmonic => {
            if b == 0.0 {
                return s_re;
            }
            if s_re == 0.0 || f_kbe == 0.0 {
                return 0.0;
            }
            1.0 / (a / s_re + b / f_kbe)
        }
    }
}

/// Result of [`rescore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Rescored {
    pub predictions: Vec<RankedPrediction>,
    /// Rows whose subject or object is missing from the vocabulary.
    pub skipped: usize,
}

/// Applies the fusion to every resolvable row and ranks the resulting
/// non-NA predictions by composite score (ties by `(s, o, relation)`).
pub fn rescore(
    table: &ReScoreTable,
    params: &ModelParams,
    vocab: &Vocab,
    config: &FusionConfig,
) -> Result<Rescored> {
    config.validate()?;
    if params.n_entities() != vocab.n_entities() || params.n_relations() != vocab.n_relations() {
        return Err(Error::Binding("model and vocabulary sizes differ".into()));
    }
    let mut predictions = Vec::new();
    let mut skipped = 0;
    let mut kbe_raw = Vec::with_capacity(params.n_relations());
    for row in &table.rows {
        let (Some(s), Some(o)) = (vocab.entities.id(&row.s), vocab.entities.id(&row.o)) else {
            skipped += 1;
            continue;
        };
        if config.needs_unit_operands() {
            if let Some((rel, v)) = row.scores.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Format {
                    line: row.line,
                    message: format!("{:?} fusion needs scores in [0, 1], {rel} has {v}", config.strategy),
                });
            }
        }
        params.score_all_relations_into(s, o, &mut kbe_raw)?;
        let kbe = match config.strategy {
            Strategy::SoftmaxWeighted => softmax(&kbe_raw),
            _ => normalize_kbe(&kbe_raw, config.kbe_norm),
        };
        let kbe_of = |rel: &str| {
            if rel == NA {
                KBE_MIDPOINT
            } else {
                vocab.relations.id(rel).map_or(KBE_MIDPOINT, |r| kbe[r])
            }
        };
        let fuse = |rel: &str, s_re: f64| composite_score(s_re, kbe_of(rel), config);
        let scores = row.scores.iter().map(|(k, v)| (k.as_str(), *v));
        let best = match config.scope {
            Scope::TopNonNa => {
                let rel = predict_relation(row)?;
                (rel != NA).then(|| (rel, fuse(rel, row.scores[rel])))
            }
            Scope::AllNonNa => {
                argmax(scores.map(|(k, v)| if k == NA { (k, v) } else { (k, fuse(k, v)) }))
                    .filter(|(k, _)| *k != NA)
            }
            Scope::All => argmax(scores.map(|(k, v)| (k, fuse(k, v)))).filter(|(k, _)| *k != NA),
        };
        if let Some((rel, score)) = best {
            predictions.push(RankedPrediction {
                s: row.s.clone(),
                o: row.o.clone(),
                relation: rel.to_string(),
                score,
                gold: false,
            });
        }
    }
    sort_predictions(&mut predictions);
    Ok(Rescored { predictions, skipped })
}

/// Extractor-only ranking over the rows [`rescore`] would keep.
pub fn re_only_ranking(table: &ReScoreTable, vocab: &Vocab) -> Result<Vec<RankedPrediction>> {
    let mut predictions = Vec::new();
    for row in &table.rows {
        if vocab.entities.id(&row.s).is_none() || vocab.entities.id(&row.o).is_none() {
            continue;
        }
        let rel = predict_relation(row)?;
        if rel != NA {
            predictions.push(RankedPrediction {
                s: row.s.clone(),
                o: row.o.clone(),
                relation: rel.to_string(),
                score: row.scores[rel],
                gold: false,
            });
        }
    }
    sort_predictions(&mut predictions);
    Ok(predictions)
}

/// Descending score, then ascending `(s, o, relation)`.
pub fn sort_predictions(preds: &mut [RankedPrediction]) {
    preds.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| (&a.s, &a.o, &a.relation).cmp(&(&b.s, &b.o, &b.relation)))
    });
}

/// Gold `(s, o, relation)` facts by name.
pub type GoldSet = HashSet<(String, String, String)>;

/// Reads a gold file in the triple TSV format (subject, relation, object).
pub fn load_gold(path: impl AsRef<Path>) -> Result<GoldSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut gold = GoldSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        match line.split('\t').collect::<Vec<_>>()[..] {
            [s, r, o] => {
                gold.insert((s.to_string(), o.to_string(), r.to_string()));
            }
            ref fields => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: format!("expected 3 tab-separated fields, found {}", fields.len()),
                })
            }
        }
    }
    Ok(gold)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Marks each prediction's gold flag and emits one point per prediction,
/// in the given order.
pub fn precision_recall_curve(preds: &mut [RankedPrediction], gold: &GoldSet) -> Result<Vec<PrPoint>> {
    if gold.is_empty() {
        return Err(Error::Config("gold set is empty".into()));
    }
    let total = gold.len() as f64;
    let mut correct = 0usize;
    let mut points = Vec::with_capacity(preds.len());
    for (k, pred) in preds.iter_mut().enumerate() {
        pred.gold = gold.contains(&(pred.s.clone(), pred.o.clone(), pred.relation.clone()));
        correct += usize::from(pred.gold);
        points.push(PrPoint {
            recall: correct as f64 / total,
            precision: correct as f64 / (k + 1) as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under the curve, starting from recall 0 at the first
/// point's precision.
pub fn area_under_curve(points: &[PrPoint]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let mut prev = PrPoint {
        recall: 0.0,
        precision: first.precision,
    };
    let mut area = 0.0;
    for p in points {
        area += (p.recall - prev.recall) * (p.precision + prev.precision) / 2.0;
        prev = *p;
    }
    area
}

/// Writes `recall,precision` rows with a header.
pub fn write_curve_csv(path: impl AsRef<Path>, points: &[PrPoint]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(out, "recall,precision").expect("vec write");
    for p in points {
        writeln!(out, "{},{}", p.recall, p.precision).expect("vec write");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
