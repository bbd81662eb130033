//! Missing-modality probe.
//!
//! A classifier is trained on complete latents only and then fed the latents
//! of every pathway. It sees nothing but `s`-dimensional vectors, so any drop
//! in accuracy on a single-modality pathway reflects how far that pathway's
//! latents sit from the complete ones.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{optim_build, Activation, EncoderSpec, GmcModel, Mlp, OptimizerKind, Pathway};
use crate::rng::{domain, keyed};
use crate::synthdata::{MultimodalDataset, Split};
use crate::tensor::{Tape, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
    pub optimizer: OptimizerKind,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            epochs: 50,
            learning_rate: 1e-3,
            batch_size: 64,
            hidden: vec![256, 128],
            seed: 0,
            optimizer: OptimizerKind::Adam,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(
                "learning_rate",
                "must be finite and non-negative",
            ));
        }
        if let Some(pos) = self.hidden.iter().position(|&w| w == 0) {
            return Err(Error::config(format!("hidden[{pos}]"), "must be positive"));
        }
        Ok(())
    }
}

/// ReLU MLP from latents to class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeClassifier {
    net: Mlp,
}

impl ProbeClassifier {
    pub fn new(input_dim: usize, n_classes: usize, config: &ProbeConfig) -> Result<Self> {
        config.validate()?;
        if n_classes < 2 {
            return Err(Error::contract("a classifier needs at least 2 classes"));
        }
        let mut widths = vec![input_dim];
        widths.extend(&config.hidden);
        widths.push(n_classes);
        let mut rng = keyed(config.seed, domain::PROBE_INIT, 0, 0);
        Ok(ProbeClassifier {
            net: Mlp::init(EncoderSpec::uniform(widths, Activation::Relu), &mut rng)?,
        })
    }

    pub fn from_net(net: Mlp) -> Result<Self> {
        if net
            .spec()
            .activations
            .iter()
            .any(|&a| a != Activation::Relu)
        {
            return Err(Error::contract("probe layers use ReLU"));
        }
        Ok(ProbeClassifier { net })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.net.output_dim()
    }

    pub fn logits(&self, z: &Tensor) -> Result<Tensor> {
        let (_, width) = z.dims2()?;
        if width != self.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "probe",
                lhs: z.shape().to_vec(),
                rhs: vec![self.input_dim()],
            });
        }
        self.net.apply(z)
    }

    /// Arg-max class per row; ties go to the lower class.
    pub fn predict(&self, z: &Tensor) -> Result<Vec<usize>> {
        let logits = self.logits(z)?;
        Ok((0..logits.rows())
            .map(|i| {
                let row = logits.row(i);
                (0..row.len()).fold(0, |best, k| if row[k] > row[best] { k } else { best })
            })
            .collect())
    }

    /// Exact fraction of rows classified as `labels`.
    pub fn accuracy(&self, z: &Tensor, labels: &[usize]) -> Result<f64> {
        if labels.len() != z.rows() {
            return Err(Error::contract(format!(
                "{} labels for {} rows",
                labels.len(),
                z.rows()
            )));
        }
        if labels.is_empty() {
            return Err(Error::contract("accuracy of an empty set"));
        }
        let pred = self.predict(z)?;
        let hits = pred.iter().zip(labels).filter(|(p, y)| p == y).count();
        Ok(hits as f64 / labels.len() as f64)
    }

    /// Summed cross-entropy of `z` against `labels`.
    pub fn cross_entropy(&self, z: &Tensor, labels: &[usize]) -> Result<f64> {
        let logits = self.logits(z)?;
        let mut tape = Tape::without_grad();
        let l = tape.constant(logits);
        let total = record_cross_entropy(&mut tape, l, labels)?;
        tape.item(total)
    }
}

/// `Σ_i [logsumexp(logits_i) − logits_i[y_i]]`.
fn record_cross_entropy(
    tape: &mut Tape,
    logits: crate::tensor::Var,
    labels: &[usize],
) -> Result<crate::tensor::Var> {
    let (n, c) = tape.value(logits).dims2()?;
    if let Some(&y) = labels.iter().find(|&&y| y >= c) {
        return Err(Error::contract(format!(
            "label {y} out of range for {c} classes"
        )));
    }
    let mut onehot = vec![0.0; n * c];
    for (i, &y) in labels.iter().enumerate() {
        onehot[i * c + y] = 1.0;
    }
    let mask = tape.constant(Tensor::matrix(n, c, onehot)?);
    let picked = tape.mul(logits, mask)?;
    let picked = tape.sum(picked);
    let lse = tape.log_sum_exp_rows(logits)?;
    let lse = tape.sum(lse);
    tape.sub(lse, picked)
}

/// Trains a probe on `z` with mean cross-entropy per mini-batch.
pub fn train_probe(
    z: &Tensor,
    labels: &[usize],
    n_classes: usize,
    config: &ProbeConfig,
) -> Result<ProbeClassifier> {
    let (n, width) = z.dims2()?;
    if labels.len() != n {
        return Err(Error::contract(format!(
            "{} labels for {n} rows",
            labels.len()
        )));
    }
    let mut probe = ProbeClassifier::new(width, n_classes, config)?;
    let mut opt = optim_build(config.optimizer, config.learning_rate);
    let mut step = 0;
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut keyed(
            config.seed,
            domain::PROBE_SHUFFLE,
            epoch as u64,
            0,
        ));
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut tape = Tape::new();
            let vars = probe.net.bind(&mut tape);
            let x = tape.constant(z.select_rows(chunk)?);
            let logits = probe.net.forward(&mut tape, &vars, x)?;
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let total = record_cross_entropy(&mut tape, logits, &y)?;
            let loss = tape.scale(total, 1.0 / chunk.len() as f64);
            if !tape.item(loss)?.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step,
                    seed: config.seed,
                    epoch,
                    batch: b,
                });
            }
            tape.backward(loss)?;
            let handles: Vec<_> = vars.iter().flat_map(|&(w, b)| [w, b]).collect();
            let grads: Vec<&[f64]> = handles
                .iter()
                .map(|&v| {
                    tape.grad(v)
                        .ok_or_else(|| Error::contract("probe parameter received no gradient"))
                })
                .collect::<Result<_>>()?;
            let mut params: Vec<&mut Tensor> = probe
                .net
                .layers_mut()
                .iter_mut()
                .flat_map(|l| [&mut l.weight, &mut l.bias])
                .collect();
            opt.step(&mut params, &grads)?;
            step += 1;
        }
    }
    Ok(probe)
}

/// Encodes every sample of `split` through `pathway`.
pub fn encode_split(
    model: &GmcModel,
    dataset: &MultimodalDataset,
    split: Split,
    pathway: Pathway,
) -> Result<Tensor> {
    let idx = dataset.indices(split);
    let batch = dataset.batch(&idx)?;
    let x = match pathway {
        Pathway::Complete => &batch.complete,
        Pathway::Modality(m) => batch
            .modalities
            .get(m)
            .ok_or_else(|| Error::contract(format!("dataset has no modality {}", m + 1)))?,
    };
    model.encode(pathway, x)
}

/// Trains a probe on the complete latents of the training split.
pub fn train_probe_on_model(
    model: &GmcModel,
    dataset: &MultimodalDataset,
    config: &ProbeConfig,
) -> Result<ProbeClassifier> {
    let z = encode_split(model, dataset, Split::Train, Pathway::Complete)?;
    let labels: Vec<usize> = dataset
        .indices(Split::Train)
        .iter()
        .map(|&i| dataset.labels()[i])
        .collect();
    train_probe(&z, &labels, dataset.n_classes(), config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayAccuracy {
    #[serde(with = "pathway_name")]
    pub pathway: Pathway,
    pub accuracy: f64,
}

mod pathway_name {
    use super::Pathway;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Pathway, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(p)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Pathway, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Probe accuracy per pathway: complete first, then modalities in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessTable {
    pub split: Split,
    pub rows: Vec<PathwayAccuracy>,
}

impl RobustnessTable {
    pub fn accuracy(&self, pathway: Pathway) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.pathway == pathway)
            .map(|r| r.accuracy)
    }
}

/// Feeds the same probe the latents of every pathway on `split`.
pub fn evaluate_robustness(
    model: &GmcModel,
    probe: &ProbeClassifier,
    dataset: &MultimodalDataset,
    split: Split,
) -> Result<RobustnessTable> {
    if probe.input_dim() != model.latent_dim() {
        return Err(Error::contract(format!(
            "probe reads {} dims but the model emits {}",
            probe.input_dim(),
            model.latent_dim()
        )));
    }
    let labels: Vec<usize> = dataset
        .indices(split)
        .iter()
        .map(|&i| dataset.labels()[i])
        .collect();
    let rows = model
        .pathways()
        .into_iter()
        .map(|p| {
            let z = encode_split(model, dataset, split, p)?;
            Ok(PathwayAccuracy {
                pathway: p,
                accuracy: probe.accuracy(&z, &labels)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RobustnessTable { split, rows })
}
