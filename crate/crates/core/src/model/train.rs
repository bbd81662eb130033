use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::optim::{self, Optimizer, OptimizerKind};
use super::{GmcModel, ModelVars, Pathway};
use crate::error::{Error, Result};
use crate::loss::{
    contrastive_loss, ContrastiveLoss, LossVariant, RepresentationVars, Temperature,
};
use crate::rng::{domain, keyed};
use crate::synthdata::{MultimodalBatch, MultimodalDataset, Split};
use crate::tensor::{grad_check_many, GradCheckReport, Tape, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub tau: Temperature,
    pub seed: u64,
    pub loss_variant: LossVariant,
    pub optimizer: OptimizerKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            tau: Temperature::default(),
            seed: 0,
            loss_variant: LossVariant::Full,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::config(
                "batch_size",
                "every positive pair needs a negative, so B >= 2",
            ));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(
                "learning_rate",
                "must be finite and non-negative",
            ));
        }
        Ok(())
    }
}

/// Records the contrastive loss of `batch` through every pathway of `model`.
pub fn record_loss(
    model: &GmcModel,
    tape: &mut Tape,
    vars: &ModelVars,
    batch: &MultimodalBatch,
    tau: Temperature,
    variant: LossVariant,
) -> Result<ContrastiveLoss> {
    if batch.modalities.len() != model.modality_count() {
        return Err(Error::contract(format!(
            "batch has {} modalities, model {}",
            batch.modalities.len(),
            model.modality_count()
        )));
    }
    let mut per_modality = Vec::with_capacity(batch.modalities.len());
    for (m, x) in batch.modalities.iter().enumerate() {
        let x = tape.constant(x.clone());
        per_modality.push(model.forward(tape, vars, Pathway::Modality(m), x)?.1);
    }
    let x = tape.constant(batch.complete.clone());
    let complete = model.forward(tape, vars, Pathway::Complete, x)?.1;
    let reps = RepresentationVars::new(tape, per_modality, complete)?;
    contrastive_loss(tape, &reps, tau, variant)
}

/// Compares tape gradients of the batch loss with respect to every model
/// parameter against central differences.
pub fn check_pipeline_gradients(
    model: &GmcModel,
    batch: &MultimodalBatch,
    tau: Temperature,
    variant: LossVariant,
    step: f64,
) -> Result<GradCheckReport> {
    let params: Vec<Tensor> = model.params().into_iter().cloned().collect();
    grad_check_many(
        |tape, handles| {
            let vars = model.vars_from(handles)?;
            Ok(record_loss(model, tape, &vars, batch, tau, variant)?.total)
        },
        &params,
        step,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    /// Batch loss `Σ_m Σ_i l_m(i)` before the update.
    pub loss: f64,
    /// `loss / (M·B)`.
    pub per_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's batches of the per-term loss.
    pub mean_loss: f64,
    pub batches: usize,
}

/// Owns a model and its optimizer state.
pub struct Trainer {
    model: GmcModel,
    config: TrainConfig,
    optimizer: Box<dyn Optimizer + Send>,
    steps: usize,
}

impl Trainer {
    pub fn new(model: GmcModel, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizer = optim::build(config.optimizer, config.learning_rate);
        Ok(Trainer {
            model,
            config,
            optimizer,
            steps: 0,
        })
    }

    pub fn model(&self) -> &GmcModel {
        &self.model
    }

    pub fn into_model(self) -> GmcModel {
        self.model
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Loss of `batch` under the current parameters, without updating.
    pub fn evaluate(&self, batch: &MultimodalBatch) -> Result<StepOutcome> {
        let mut tape = Tape::without_grad();
        let vars = self.model.bind(&mut tape);
        let loss = record_loss(
            &self.model,
            &mut tape,
            &vars,
            batch,
            self.config.tau,
            self.config.loss_variant,
        )?;
        Ok(StepOutcome {
            loss: tape.item(loss.total)?,
            per_term: loss.per_term_mean(&tape)?,
        })
    }

    /// One optimizer update on `batch`.
    pub fn step(&mut self, batch: &MultimodalBatch) -> Result<StepOutcome> {
        self.step_at(batch, 0, self.steps)
    }

    fn step_at(
        &mut self,
        batch: &MultimodalBatch,
        epoch: usize,
        batch_index: usize,
    ) -> Result<StepOutcome> {
        let mut tape = Tape::new();
        let vars = self.model.bind(&mut tape);
        let non_finite = Error::NonFiniteLoss {
            step: self.steps,
            seed: self.config.seed,
            epoch,
            batch: batch_index,
        };
        let loss = match record_loss(
            &self.model,
            &mut tape,
            &vars,
            batch,
            self.config.tau,
            self.config.loss_variant,
        ) {
            // A latent with a NaN or infinite norm means the numbers have already diverged.
            Err(Error::DegenerateVector { norm, .. }) if !norm.is_finite() => {
                return Err(non_finite)
            }
            other => other?,
        };
        let total = tape.item(loss.total)?;
        if !total.is_finite() {
            return Err(non_finite);
        }
        tape.backward(loss.total)?;
        let handles = vars.params();
        let zeros: Vec<Vec<f64>> = handles
            .iter()
            .map(|&v| {
                if tape.grad(v).is_none() {
                    vec![0.0; tape.value(v).len()]
                } else {
                    Vec::new()
                }
            })
            .collect();
        let grads: Vec<&[f64]> = handles
            .iter()
            .zip(&zeros)
            .map(|(&v, z)| tape.grad(v).unwrap_or(z))
            .collect();
        let mut params = self.model.params_mut();
        self.optimizer.step(&mut params, &grads)?;
        self.steps += 1;
        Ok(StepOutcome {
            loss: total,
            per_term: loss.per_term_mean(&tape)?,
        })
    }

    /// Runs one epoch over `indices`, shuffled by `(seed, epoch)`. A trailing
    /// batch with fewer than two samples is dropped.
    pub fn run_epoch(
        &mut self,
        dataset: &MultimodalDataset,
        indices: &[usize],
        epoch: usize,
    ) -> Result<EpochRecord> {
        let mut order = indices.to_vec();
        order.shuffle(&mut keyed(
            self.config.seed,
            domain::EPOCH_SHUFFLE,
            epoch as u64,
            0,
        ));
        let mut sum = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(self.config.batch_size).enumerate() {
            if chunk.len() < 2 {
                continue;
            }
            let batch = dataset.batch(chunk)?;
            sum += self.step_at(&batch, epoch, b)?.per_term;
            batches += 1;
        }
        Ok(EpochRecord {
            epoch,
            mean_loss: if batches == 0 {
                0.0
            } else {
                sum / batches as f64
            },
            batches,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: GmcModel,
    pub trace: Vec<EpochRecord>,
}

/// Trains `model` on the training split of `dataset`.
pub fn train(
    model: GmcModel,
    dataset: &MultimodalDataset,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    if dataset.input_dims() != model.input_dims() {
        return Err(Error::contract(format!(
            "dataset modality widths {:?} do not match the model's {:?}",
            dataset.input_dims(),
            model.input_dims()
        )));
    }
    let indices = dataset.indices(Split::Train);
    let mut trainer = Trainer::new(model, config.clone())?;
    let trace = (0..config.epochs)
        .map(|e| trainer.run_epoch(dataset, &indices, e))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainOutcome {
        model: trainer.into_model(),
        trace,
    })
}
