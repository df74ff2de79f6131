//! Training loops for the three models.
//!
//! TransE minimizes the margin hinge between a positive and its corruptions
//! and renormalizes entity rows after each epoch. DistMult and ComplEx
//! minimize the L2-regularized logistic loss with positives labelled +1 and
//! corruptions labelled -1. Corruptions may replace the subject, the object
//! or the relation.

pub mod optim;
pub mod sampling;
pub mod steps;

use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams, Norm};
use crate::store::KnowledgeBase;

pub use optim::{BatchGrad, GradSink, Optimizer, OptimizerKind, SparseGrad, Table};
pub use sampling::{CorruptionWeights, NegativeSampler, Slot};
pub use steps::{logistic_loss_grad, logistic_step, margin_loss_grad, margin_step, Scratch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub dim: usize,
    /// TransE distance.
    pub norm: Norm,
    /// Hinge margin γ (TransE).
    pub margin: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub negatives: usize,
    pub corruption: CorruptionWeights,
    /// L2 coefficient λ (DistMult, ComplEx).
    pub lambda: f64,
    pub seed: u64,
    /// Unit-normalize TransE entity rows after every epoch.
    pub normalize_entities: bool,
    /// Redraw negatives that are present in train.
    pub filtered_negatives: bool,
}

impl TrainConfig {
    /// Defaults for `model`: SGD for TransE, Adagrad for the bilinear models.
    pub fn for_model(model: ModelKind) -> Self {
        let transe = model == ModelKind::TransE;
        Self {
            model,
            dim: 100,
            norm: Norm::L1,
            margin: 1.0,
            learning_rate: if transe { 0.01 } else { 0.05 },
            optimizer: if transe { OptimizerKind::Sgd } else { OptimizerKind::Adagrad },
            epochs: 1000,
            batch_size: 100,
            negatives: if transe { 1 } else { 5 },
            corruption: CorruptionWeights::default(),
            lambda: 1e-3,
            seed: 0,
            normalize_entities: true,
            filtered_negatives: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.dim == 0 {
            return fail("dim must be at least 1".into());
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return fail(format!("margin must be positive, got {}", self.margin));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1".into());
        }
        if self.negatives == 0 {
            return fail("need at least one negative per positive".into());
        }
        self.corruption.validate()
    }
}

/// Outcome of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: ModelKind,
    pub epochs: usize,
    pub epoch_losses: Vec<f64>,
    /// Not serialized: reports of identical runs must be byte-identical.
    #[serde(skip)]
    pub wall_time_secs: f64,
    pub checkpoint: Option<PathBuf>,
    pub seed: u64,
}

/// Fresh tables with entries uniform in `[-6/√K, 6/√K]`; TransE entity rows
/// are then scaled to unit L2 norm.
pub fn init_params(kind: ModelKind, dim: usize, n_entities: usize, n_relations: usize, seed: u64) -> ModelParams {
    let mut params = ModelParams::zeros(kind, dim.max(1), n_entities, n_relations);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 6.0 / (dim.max(1) as f64).sqrt();
    for v in params.entity_table_mut() {
        *v = rng.gen_range(-bound..=bound);
    }
    for v in params.relation_table_mut() {
        *v = rng.gen_range(-bound..=bound);
    }
    if kind == ModelKind::TransE {
        normalize_entities(&mut params);
    }
    params
}

/// Scales every entity row to unit L2 norm (zero rows are left alone).
pub fn normalize_entities(params: &mut ModelParams) {
    let w = params.width();
    for row in params.entity_table_mut().chunks_exact_mut(w) {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

pub fn train(kb: &KnowledgeBase, config: &TrainConfig) -> Result<(TrainReport, ModelParams)> {
    train_with_progress(kb, config, |_, _| {})
}

/// Trains from scratch, calling `progress(epoch, mean_loss)` after each epoch (0-based).
pub fn train_with_progress(
    kb: &KnowledgeBase,
    config: &TrainConfig,
    progress: impl FnMut(usize, f64),
) -> Result<(TrainReport, ModelParams)> {
    config.validate()?;
    let params = init_params(
        config.model,
        config.dim,
        kb.vocab.n_entities(),
        kb.vocab.n_relations(),
        config.seed,
    )
    .with_norm(config.norm);
    train_from(kb, config, params, progress)
}

/// Continues training `params`, which must be bound to `kb`'s vocabulary.
pub fn train_from(
    kb: &KnowledgeBase,
    config: &TrainConfig,
    mut params: ModelParams,
    mut progress: impl FnMut(usize, f64),
) -> Result<(TrainReport, ModelParams)> {
    config.validate()?;
    if kb.train.is_empty() {
        return Err(Error::Config("train split is empty".into()));
    }
    if params.kind() != config.model {
        return Err(Error::ModelKind {
            expected: config.model,
            found: params.kind(),
        });
    }
    if params.n_entities() != kb.vocab.n_entities() || params.n_relations() != kb.vocab.n_relations() {
        return Err(Error::Binding(format!(
            "params have {}x{} rows, vocabulary has {} entities and {} relations",
            params.n_entities(),
            params.n_relations(),
            kb.vocab.n_entities(),
            kb.vocab.n_relations()
        )));
    }
    let started = Instant::now();
    let sampler = NegativeSampler::new(kb, config.corruption, config.filtered_negatives)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut optimizer = Optimizer::new(config.optimizer, config.learning_rate, &params);
    let mut grad = BatchGrad::new(&params);
    let mut scratch = Scratch::new(params.width());
    let mut order: Vec<usize> = (0..kb.train.len()).collect();
    let transe = config.model == ModelKind::TransE;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut terms = 0usize;
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            for &idx in chunk {
                let pos = kb.train[idx];
                if !transe {
                    total += logistic_loss_grad(&params, pos, 1.0, config.lambda, &mut grad);
                    terms += 1;
                }
                for _ in 0..config.negatives {
                    let neg = sampler.sample(pos, &mut rng)?;
                    total += if transe {
                        margin_loss_grad(&params, pos, neg, config.margin, &mut scratch, &mut grad)
                    } else {
                        logistic_loss_grad(&params, neg, -1.0, config.lambda, &mut grad)
                    };
                    terms += 1;
                }
            }
            optimizer.apply(&mut params, grad.rows());
            check_rows(&params, &grad, epoch, batch)?;
            grad.clear();
        }
        if transe && config.normalize_entities {
            normalize_entities(&mut params);
        }
        let mean = total / terms as f64;
        if !mean.is_finite() {
            return Err(Error::Numerical {
                epoch,
                batch: order.len().div_ceil(config.batch_size).saturating_sub(1),
                detail: format!("mean epoch loss is {mean}"),
            });
        }
        epoch_losses.push(mean);
        progress(epoch, mean);
    }

    let report = TrainReport {
        model: config.model,
        epochs: config.epochs,
        epoch_losses,
        wall_time_secs: started.elapsed().as_secs_f64(),
        checkpoint: None,
        seed: config.seed,
    };
    Ok((report, params))
}

fn check_rows(params: &ModelParams, grad: &BatchGrad, epoch: usize, batch: usize) -> Result<()> {
    for (table, row, _) in grad.rows() {
        let values = match table {
            Table::Entity => params.entity(row),
            Table::Relation => params.relation(row),
        };
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                epoch,
                batch,
                detail: format!("{table:?} row {row} holds {v}"),
            });
        }
    }
    Ok(())
}
