//! Per-example losses: the margin hinge for TransE and the regularized
//! logistic loss for the bilinear models.

use crate::error::{Error, Result};
use crate::model::{add_bilinear_partial, add_score_gradient, translation_distance, Argument, ModelKind, ModelParams};
use crate::store::Triple;
use crate::trainer::optim::{GradSink, Optimizer, SparseGrad, Table};

/// Reusable per-row buffers for gradient evaluation.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    gs: Vec<f64>,
    gr: Vec<f64>,
    go: Vec<f64>,
}

impl Scratch {
    pub fn new(width: usize) -> Self {
        Self {
            gs: vec![0.0; width],
            gr: vec![0.0; width],
            go: vec![0.0; width],
        }
    }

    fn reset(&mut self, width: usize) {
        for v in [&mut self.gs, &mut self.gr, &mut self.go] {
            v.clear();
            v.resize(width, 0.0);
        }
    }

    fn flush(&self, t: Triple, sink: &mut impl GradSink) {
        sink.add(Table::Entity, t.s, &self.gs);
        sink.add(Table::Relation, t.r, &self.gr);
        sink.add(Table::Entity, t.o, &self.go);
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Distance of `t` under TransE, i.e. the negated score.
pub fn transe_distance(params: &ModelParams, t: Triple) -> f64 {
    translation_distance(params.norm(), params.entity(t.s), params.relation(t.r), params.entity(t.o))
}

/// Hinge `[γ + d(pos) - d(neg)]₊` and, when active, its gradient into `sink`.
pub fn margin_loss_grad(
    params: &ModelParams,
    pos: Triple,
    neg: Triple,
    margin: f64,
    scratch: &mut Scratch,
    sink: &mut impl GradSink,
) -> f64 {
    let hinge = margin + transe_distance(params, pos) - transe_distance(params, neg);
    if hinge <= 0.0 {
        return 0.0;
    }
    // d(dist)/dx = -d(score)/dx
    for (t, coeff) in [(pos, -1.0), (neg, 1.0)] {
        scratch.reset(params.width());
        add_score_gradient(
            params.kind(),
            params.norm(),
            params.entity(t.s),
            params.relation(t.r),
            params.entity(t.o),
            coeff,
            &mut scratch.gs,
            &mut scratch.gr,
            &mut scratch.go,
        );
        scratch.flush(t, sink);
    }
    hinge
}

/// `softplus(-label · score) + λ(‖e_s‖² + ‖w_r‖² + ‖e_o‖²)` and its gradient into `sink`.
pub fn logistic_loss_grad(params: &ModelParams, t: Triple, label: f64, lambda: f64, sink: &mut impl GradSink) -> f64 {
    let (es, wr, eo) = (params.entity(t.s), params.relation(t.r), params.entity(t.o));
    let score = crate::model::score_rows(params.kind(), params.norm(), es, wr, eo);
    let z = -label * score;
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let loss = softplus(z) + lambda * (sq(es) + sq(wr) + sq(eo));

    let coeff = -label * sigmoid(z);
    let width = params.width();
    for (arg, table, row, x) in [
        (Argument::Subject, Table::Entity, t.s, es),
        (Argument::Relation, Table::Relation, t.r, wr),
        (Argument::Object, Table::Entity, t.o, eo),
    ] {
        let acc = sink.row_mut(table, row, width);
        add_bilinear_partial(params.kind(), arg, es, wr, eo, coeff, acc);
        if lambda != 0.0 {
            acc.iter_mut().zip(x).for_each(|(g, x)| *g += 2.0 * lambda * x);
        }
    }
    loss
}

/// One SGD step on the margin loss of a (positive, negative) pair. Only the
/// rows named by the two triples change, and only when the hinge is active.
/// Returns the hinge value before the step.
pub fn margin_step(params: &mut ModelParams, pos: Triple, neg: Triple, margin: f64, lr: f64) -> Result<f64> {
    if params.kind() != ModelKind::TransE {
        return Err(Error::ModelKind {
            expected: ModelKind::TransE,
            found: params.kind(),
        });
    }
    params.check_triple(pos)?;
    params.check_triple(neg)?;
    let mut grad = SparseGrad::new();
    let mut scratch = Scratch::new(params.width());
    let hinge = margin_loss_grad(params, pos, neg, margin, &mut scratch, &mut grad);
    Optimizer::sgd(lr).apply(params, grad.rows());
    Ok(hinge)
}

/// One SGD step on the logistic loss of a labelled triple (`label` is ±1).
/// Returns the loss before the step.
pub fn logistic_step(params: &mut ModelParams, t: Triple, label: f64, lr: f64, lambda: f64) -> Result<f64> {
    if params.kind() == ModelKind::TransE {
        return Err(Error::ModelKind {
            expected: ModelKind::ComplEx,
            found: params.kind(),
        });
    }
    params.check_triple(t)?;
    let mut grad = SparseGrad::new();
    let loss = logistic_loss_grad(params, t, label, lambda, &mut grad);
    Optimizer::sgd(lr).apply(params, grad.rows());
    Ok(loss)
}
