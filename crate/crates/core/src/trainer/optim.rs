//! Gradient accumulation and the SGD / Adagrad row updates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

const ADAGRAD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Table {
    Entity,
    Relation,
}

/// Receives per-row gradient contributions.
pub trait GradSink {
    /// Accumulator for one row of `width` values, zero on first access.
    fn row_mut(&mut self, table: Table, row: usize, width: usize) -> &mut [f64];

    fn add(&mut self, table: Table, row: usize, grad: &[f64]) {
        let acc = self.row_mut(table, row, grad.len());
        acc.iter_mut().zip(grad).for_each(|(a, g)| *a += g);
    }
}

/// A handful of rows, merged by `(table, row)`. Used for single steps.
#[derive(Debug, Clone, Default)]
pub struct SparseGrad {
    rows: Vec<(Table, usize, Vec<f64>)>,
}

impl SparseGrad {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rows(&self) -> impl Iterator<Item = (Table, usize, &[f64])> {
        self.rows.iter().map(|(t, r, g)| (*t, *r, g.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl GradSink for SparseGrad {
    fn row_mut(&mut self, table: Table, row: usize, width: usize) -> &mut [f64] {
        let idx = match self.rows.iter().position(|(t, r, _)| *t == table && *r == row) {
            Some(idx) => idx,
            None => {
                self.rows.push((table, row, vec![0.0; width]));
                self.rows.len() - 1
            }
        };
        &mut self.rows[idx].2
    }
}

/// Dense scratch space for a minibatch, tracking which rows were touched.
#[derive(Debug, Clone)]
pub struct BatchGrad {
    width: usize,
    entity: DenseRows,
    relation: DenseRows,
}

#[derive(Debug, Clone)]
struct DenseRows {
    values: Vec<f64>,
    touched: Vec<usize>,
    marked: Vec<bool>,
}

impl DenseRows {
    fn new(rows: usize, width: usize) -> Self {
        Self {
            values: vec![0.0; rows * width],
            touched: Vec::new(),
            marked: vec![false; rows],
        }
    }

    fn row_mut(&mut self, width: usize, row: usize) -> &mut [f64] {
        if !self.marked[row] {
            self.marked[row] = true;
            self.touched.push(row);
        }
        &mut self.values[row * width..(row + 1) * width]
    }

    fn clear(&mut self, width: usize) {
        for &row in &self.touched {
            self.marked[row] = false;
            self.values[row * width..(row + 1) * width].fill(0.0);
        }
        self.touched.clear();
    }
}

impl BatchGrad {
    pub fn new(params: &ModelParams) -> Self {
        let width = params.width();
        Self {
            width,
            entity: DenseRows::new(params.n_entities(), width),
            relation: DenseRows::new(params.n_relations(), width),
        }
    }

    /// Touched rows in first-touch order.
    pub fn rows(&self) -> impl Iterator<Item = (Table, usize, &[f64])> {
        let w = self.width;
        let ent = self
            .entity
            .touched
            .iter()
            .map(move |&r| (Table::Entity, r, &self.entity.values[r * w..(r + 1) * w]));
        let rel = self
            .relation
            .touched
            .iter()
            .map(move |&r| (Table::Relation, r, &self.relation.values[r * w..(r + 1) * w]));
        ent.chain(rel)
    }

    pub fn clear(&mut self) {
        self.entity.clear(self.width);
        self.relation.clear(self.width);
    }
}

impl GradSink for BatchGrad {
    fn row_mut(&mut self, table: Table, row: usize, width: usize) -> &mut [f64] {
        debug_assert_eq!(width, self.width);
        match table {
            Table::Entity => self.entity.row_mut(self.width, row),
            Table::Relation => self.relation.row_mut(self.width, row),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adagrad,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adagrad" => Ok(OptimizerKind::Adagrad),
            _ => Err(Error::Config(format!("unknown optimizer {s:?}"))),
        }
    }
}

/// Applies descent steps row by row. Adagrad keeps one squared-gradient
/// accumulator per parameter.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    entity_acc: Vec<f64>,
    relation_acc: Vec<f64>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, params: &ModelParams) -> Self {
        let (ent, rel) = match kind {
            OptimizerKind::Sgd => (Vec::new(), Vec::new()),
            OptimizerKind::Adagrad => (
                vec![0.0; params.entity_table().len()],
                vec![0.0; params.relation_table().len()],
            ),
        };
        Self {
            kind,
            lr,
            entity_acc: ent,
            relation_acc: rel,
        }
    }

    pub fn sgd(lr: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            lr,
            entity_acc: Vec::new(),
            relation_acc: Vec::new(),
        }
    }

    /// Descends along `grad` on one row.
    pub fn step_row(&mut self, params: &mut ModelParams, table: Table, row: usize, grad: &[f64]) {
        let w = params.width();
        let target = match table {
            Table::Entity => params.entity_mut(row),
            Table::Relation => params.relation_mut(row),
        };
        match self.kind {
            OptimizerKind::Sgd => {
                for (x, g) in target.iter_mut().zip(grad) {
                    *x -= self.lr * g;
                }
            }
            OptimizerKind::Adagrad => {
                let acc = match table {
                    Table::Entity => &mut self.entity_acc[row * w..(row + 1) * w],
                    Table::Relation => &mut self.relation_acc[row * w..(row + 1) * w],
                };
                for ((x, a), g) in target.iter_mut().zip(acc.iter_mut()).zip(grad) {
                    *a += g * g;
                    *x -= self.lr * g / (a.sqrt() + ADAGRAD_EPS);
                }
            }
        }
    }

    /// Applies every row of a gradient; rows are independent so order is irrelevant.
    pub fn apply<'a>(
        &mut self,
        params: &mut ModelParams,
        rows: impl IntoIterator<Item = (Table, usize, &'a [f64])>,
    ) {
        for (table, row, grad) in rows {
            self.step_row(params, table, row, grad);
        }
    }
}
