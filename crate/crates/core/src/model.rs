//! Embedding tables and score functions for TransE, DistMult and ComplEx.
//!
//! Every score follows one convention: larger means more plausible. TransE
//! therefore returns the negated translation distance `-‖e_s + w_r - e_o‖`.
//! ComplEx rows store `K` real parts followed by `K` imaginary parts and score
//! `Re(Σ e_s · w_r · conj(e_o))`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::Triple;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    TransE,
    DistMult,
    ComplEx,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::TransE, ModelKind::DistMult, ModelKind::ComplEx];

    /// Stored reals per row for embedding dimension `dim`.
    pub fn row_width(self, dim: usize) -> usize {
        match self {
            ModelKind::ComplEx => 2 * dim,
            _ => dim,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::TransE => "TransE",
            ModelKind::DistMult => "DistMult",
            ModelKind::ComplEx => "ComplEx",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(ModelKind::TransE),
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            _ => Err(Error::Config(format!("unknown model kind {s:?}"))),
        }
    }
}

/// Distance used by TransE.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    #[default]
    L1,
    L2,
}

impl std::str::FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            _ => Err(Error::Config(format!("unknown norm {s:?}"))),
        }
    }
}

/// Score of one triple from raw rows.
///
/// Accumulates left to right in `f64`; [`ModelParams::score`] and
/// [`ModelParams::score_all_relations`] both go through here so their results
/// agree bitwise.
pub fn score_rows(kind: ModelKind, norm: Norm, es: &[f64], wr: &[f64], eo: &[f64]) -> f64 {
    match kind {
        ModelKind::TransE => -translation_distance(norm, es, wr, eo),
        ModelKind::DistMult => {
            let mut acc = 0.0;
            for k in 0..es.len() {
                acc += es[k] * wr[k] * eo[k];
            }
            acc
        }
        ModelKind::ComplEx => {
            let dim = es.len() / 2;
            let (ar, ai) = es.split_at(dim);
            let (br, bi) = wr.split_at(dim);
            let (cr, ci) = eo.split_at(dim);
            let mut acc = 0.0;
            for k in 0..dim {
                acc += ar[k] * br[k] * cr[k] + ai[k] * br[k] * ci[k] + ar[k] * bi[k] * ci[k]
                    - ai[k] * bi[k] * cr[k];
            }
            acc
        }
    }
}

/// `‖es + wr - eo‖` under `norm`.
pub fn translation_distance(norm: Norm, es: &[f64], wr: &[f64], eo: &[f64]) -> f64 {
    let mut acc = 0.0;
    match norm {
        Norm::L1 => {
            for k in 0..es.len() {
                acc += (es[k] + wr[k] - eo[k]).abs();
            }
            acc
        }
        Norm::L2 => {
            for k in 0..es.len() {
                let d = es[k] + wr[k] - eo[k];
                acc += d * d;
            }
            acc.sqrt()
        }
    }
}

/// Adds `coeff · ∂score/∂x` for each of the three rows into `gs`, `gr`, `go`.
///
/// TransE-L1 uses the sign subgradient (0 at a kink); TransE-L2 returns a zero
/// gradient when the translation residual vanishes.
#[allow(clippy::too_many_arguments)]
pub fn add_score_gradient(
    kind: ModelKind,
    norm: Norm,
    es: &[f64],
    wr: &[f64],
    eo: &[f64],
    coeff: f64,
    gs: &mut [f64],
    gr: &mut [f64],
    go: &mut [f64],
) {
    match kind {
        ModelKind::TransE => {
            let scale = match norm {
                Norm::L1 => 1.0,
                Norm::L2 => {
                    let dist = translation_distance(Norm::L2, es, wr, eo);
                    if dist == 0.0 {
                        return;
                    }
                    1.0 / dist
                }
            };
            for k in 0..es.len() {
                let d = es[k] + wr[k] - eo[k];
                let unit = match norm {
                    Norm::L1 => sign(d),
                    Norm::L2 => d * scale,
                };
                // score = -dist: d/d(es) = -unit, d/d(wr) = -unit, d/d(eo) = +unit
                let g = coeff * unit;
                gs[k] -= g;
                gr[k] -= g;
                go[k] += g;
            }
        }
        ModelKind::DistMult => {
            for k in 0..es.len() {
                gs[k] += coeff * wr[k] * eo[k];
                gr[k] += coeff * es[k] * eo[k];
                go[k] += coeff * es[k] * wr[k];
            }
        }
        ModelKind::ComplEx => {
            let dim = es.len() / 2;
            for k in 0..dim {
                let (ar, ai) = (es[k], es[dim + k]);
                let (br, bi) = (wr[k], wr[dim + k]);
                let (cr, ci) = (eo[k], eo[dim + k]);
                gs[k] += coeff * (br * cr + bi * ci);
                gs[dim + k] += coeff * (br * ci - bi * cr);
                gr[k] += coeff * (ar * cr + ai * ci);
                gr[dim + k] += coeff * (ar * ci - ai * cr);
                go[k] += coeff * (ar * br - ai * bi);
                go[dim + k] += coeff * (ai * br + ar * bi);
            }
        }
    }
}

/// One argument of a scored triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Argument {
    Subject,
    Relation,
    Object,
}

/// Adds `coeff · ∂score/∂arg` to `out` for DistMult or ComplEx.
///
/// # Panics
///
/// On TransE, whose partials share the residual norm; use
/// [`add_score_gradient`] there.
pub fn add_bilinear_partial(
    kind: ModelKind,
    arg: Argument,
    es: &[f64],
    wr: &[f64],
    eo: &[f64],
    coeff: f64,
    out: &mut [f64],
) {
    match kind {
        ModelKind::TransE => panic!("TransE is not bilinear"),
        ModelKind::DistMult => {
            let (x, y) = match arg {
                Argument::Subject => (wr, eo),
                Argument::Relation => (es, eo),
                Argument::Object => (es, wr),
            };
            for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                *o += coeff * a * b;
            }
        }
        ModelKind::ComplEx => {
            let dim = es.len() / 2;
            let (ar, ai) = es.split_at(dim);
            let (br, bi) = wr.split_at(dim);
            let (cr, ci) = eo.split_at(dim);
            let (out_re, out_im) = out.split_at_mut(dim);
            for k in 0..dim {
                let (re, im) = match arg {
                    Argument::Subject => (br[k] * cr[k] + bi[k] * ci[k], br[k] * ci[k] - bi[k] * cr[k]),
                    Argument::Relation => (ar[k] * cr[k] + ai[k] * ci[k], ar[k] * ci[k] - ai[k] * cr[k]),
                    Argument::Object => (ar[k] * br[k] - ai[k] * bi[k], ai[k] * br[k] + ar[k] * bi[k]),
                };
                out_re[k] += coeff * re;
                out_im[k] += coeff * im;
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradient of a triple's score with respect to its three rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleGradient {
    pub subject: Vec<f64>,
    pub relation: Vec<f64>,
    pub object: Vec<f64>,
}

/// Entity and relation embedding tables for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    kind: ModelKind,
    dim: usize,
    norm: Norm,
    n_entities: usize,
    n_relations: usize,
    entities: Vec<f64>,
    relations: Vec<f64>,
}

impl ModelParams {
    /// All-zero tables.
    pub fn zeros(kind: ModelKind, dim: usize, n_entities: usize, n_relations: usize) -> Self {
        let width = kind.row_width(dim);
        Self {
            kind,
            dim,
            norm: Norm::default(),
            n_entities,
            n_relations,
            entities: vec![0.0; n_entities * width],
            relations: vec![0.0; n_relations * width],
        }
    }

    /// Wraps row-major tables, checking their shape and finiteness.
    pub fn from_tables(
        kind: ModelKind,
        dim: usize,
        norm: Norm,
        entities: Vec<f64>,
        relations: Vec<f64>,
    ) -> Result<Self> {
        let width = kind.row_width(dim);
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        if entities.len() % width != 0 || relations.len() % width != 0 {
            return Err(Error::Config(format!(
                "table lengths {} / {} are not multiples of row width {width}",
                entities.len(),
                relations.len()
            )));
        }
        let params = Self {
            kind,
            dim,
            norm,
            n_entities: entities.len() / width,
            n_relations: relations.len() / width,
            entities,
            relations,
        };
        if !params.all_finite() {
            return Err(Error::Config("embedding tables contain non-finite values".into()));
        }
        Ok(params)
    }

    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn width(&self) -> usize {
        self.kind.row_width(self.dim)
    }

    pub fn n_entities(&self) -> usize {
        self.n_entities
    }

    pub fn n_relations(&self) -> usize {
        self.n_relations
    }

    pub fn entity(&self, id: usize) -> &[f64] {
        let w = self.width();
        &self.entities[id * w..(id + 1) * w]
    }

    pub fn relation(&self, id: usize) -> &[f64] {
        let w = self.width();
        &self.relations[id * w..(id + 1) * w]
    }

    pub fn entity_mut(&mut self, id: usize) -> &mut [f64] {
        let w = self.width();
        &mut self.entities[id * w..(id + 1) * w]
    }

    pub fn relation_mut(&mut self, id: usize) -> &mut [f64] {
        let w = self.width();
        &mut self.relations[id * w..(id + 1) * w]
    }

    pub fn entity_table(&self) -> &[f64] {
        &self.entities
    }

    pub fn relation_table(&self) -> &[f64] {
        &self.relations
    }

    pub fn entity_table_mut(&mut self) -> &mut [f64] {
        &mut self.entities
    }

    pub fn relation_table_mut(&mut self) -> &mut [f64] {
        &mut self.relations
    }

    pub fn all_finite(&self) -> bool {
        self.entities.iter().chain(&self.relations).all(|v| v.is_finite())
    }

    pub fn check_triple(&self, t: Triple) -> Result<()> {
        self.check_entity(t.s)?;
        self.check_entity(t.o)?;
        if t.r >= self.n_relations {
            return Err(Error::IdOutOfRange {
                kind: "relation",
                id: t.r,
                size: self.n_relations,
            });
        }
        Ok(())
    }

    fn check_entity(&self, id: usize) -> Result<()> {
        if id >= self.n_entities {
            return Err(Error::IdOutOfRange {
                kind: "entity",
                id,
                size: self.n_entities,
            });
        }
        Ok(())
    }

    fn expect_kind(&self, expected: ModelKind) -> Result<()> {
        if self.kind != expected {
            return Err(Error::ModelKind {
                expected,
                found: self.kind,
            });
        }
        Ok(())
    }

    /// Score of `t` under this model's own kind.
    pub fn score(&self, t: Triple) -> Result<f64> {
        self.check_triple(t)?;
        Ok(score_rows(
            self.kind,
            self.norm,
            self.entity(t.s),
            self.relation(t.r),
            self.entity(t.o),
        ))
    }

    pub fn score_transe(&self, t: Triple) -> Result<f64> {
        self.expect_kind(ModelKind::TransE)?;
        self.score(t)
    }

    pub fn score_distmult(&self, t: Triple) -> Result<f64> {
        self.expect_kind(ModelKind::DistMult)?;
        self.score(t)
    }

    pub fn score_complex(&self, t: Triple) -> Result<f64> {
        self.expect_kind(ModelKind::ComplEx)?;
        self.score(t)
    }

    /// Scores of `(s, r, o)` for every relation `r`, in id order.
    pub fn score_all_relations(&self, s: usize, o: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.n_relations);
        self.score_all_relations_into(s, o, &mut out)?;
        Ok(out)
    }

    /// Like [`Self::score_all_relations`], reusing `out`.
    pub fn score_all_relations_into(&self, s: usize, o: usize, out: &mut Vec<f64>) -> Result<()> {
        self.check_entity(s)?;
        self.check_entity(o)?;
        let (es, eo) = (self.entity(s), self.entity(o));
        out.clear();
        out.extend(
            (0..self.n_relations).map(|r| score_rows(self.kind, self.norm, es, self.relation(r), eo)),
        );
        Ok(())
    }

    /// Analytic gradient of `score(t)` with respect to the subject, relation
    /// and object rows, treated as independent arguments.
    pub fn score_gradients(&self, t: Triple) -> Result<TripleGradient> {
        self.check_triple(t)?;
        let w = self.width();
        let mut grad = TripleGradient {
            subject: vec![0.0; w],
            relation: vec![0.0; w],
            object: vec![0.0; w],
        };
        add_score_gradient(
            self.kind,
            self.norm,
            self.entity(t.s),
            self.relation(t.r),
            self.entity(t.o),
            1.0,
            &mut grad.subject,
            &mut grad.relation,
            &mut grad.object,
        );
        Ok(grad)
    }
}
