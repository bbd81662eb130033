//! Seeded synthetic multimodal benchmark.
//!
//! Every sample draws a class `y` and a style vector shared by all of its
//! modalities. Modality `m` renders them linearly,
//!
//! ```text
//! x_m = A_m · onehot(y) + B_m · style + ε_m,   ε_m ~ N(0, σ_m² I)
//! ```
//!
//! where `A_m` and `B_m` are fixed per configuration with standard normal
//! entries scaled by `1/√dim_m`. Each random quantity comes from its own keyed
//! stream, so sample `i` does not depend on how many other samples exist.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, keyed};
use crate::tensor::Tensor;

/// Noise standard deviation, either shared or given per modality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NoiseSigma {
    Shared(f64),
    PerModality(Vec<f64>),
}

impl NoiseSigma {
    pub fn for_modality(&self, m: usize) -> f64 {
        match self {
            NoiseSigma::Shared(s) => *s,
            NoiseSigma::PerModality(v) => v[m],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub n_classes: usize,
    pub modality_dims: Vec<usize>,
    pub style_dim: usize,
    pub noise_sigma: NoiseSigma,
    pub seed: u64,
    /// Fraction of samples (by index, from the front) in the training split.
    pub train_fraction: f64,
    /// Appends a noiseless one-hot label modality of width `n_classes`.
    pub label_modality: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_samples: 2000,
            n_classes: 10,
            modality_dims: vec![20, 16, 12],
            style_dim: 4,
            noise_sigma: NoiseSigma::Shared(0.05),
            seed: 0,
            train_fraction: 0.8,
            label_modality: false,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_classes < 2 {
            return Err(Error::config("n_classes", "need at least 2 classes"));
        }
        if self.modality_dims.len() + usize::from(self.label_modality) < 2 {
            return Err(Error::config("modality_dims", "need at least 2 modalities"));
        }
        if let Some(pos) = self.modality_dims.iter().position(|&d| d == 0) {
            return Err(Error::config(
                format!("modality_dims[{pos}]"),
                "dimensions must be positive",
            ));
        }
        match &self.noise_sigma {
            NoiseSigma::Shared(s) if !(*s >= 0.0 && s.is_finite()) => {
                return Err(Error::config(
                    "noise_sigma",
                    "must be finite and non-negative",
                ));
            }
            NoiseSigma::PerModality(v) => {
                if v.len() != self.modality_dims.len() {
                    return Err(Error::config(
                        "noise_sigma",
                        format!(
                            "expected {} entries, got {}",
                            self.modality_dims.len(),
                            v.len()
                        ),
                    ));
                }
                if let Some(pos) = v.iter().position(|s| !(*s >= 0.0 && s.is_finite())) {
                    return Err(Error::config(
                        format!("noise_sigma[{pos}]"),
                        "must be finite and non-negative",
                    ));
                }
            }
            _ => {}
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config("train_fraction", "must lie in (0, 1)"));
        }
        let n_train = self.train_count();
        if n_train < 2 || self.n_samples - n_train < 2 {
            return Err(Error::config(
                "n_samples",
                "both splits need at least 2 samples",
            ));
        }
        Ok(())
    }

    pub fn train_count(&self) -> usize {
        (self.n_samples as f64 * self.train_fraction).round() as usize
    }

    /// Widths of every rendered modality, including the label modality.
    pub fn observed_dims(&self) -> Vec<usize> {
        let mut dims = self.modality_dims.clone();
        if self.label_modality {
            dims.push(self.n_classes);
        }
        dims
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Observations of `B` samples through every modality.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalBatch {
    /// One `B × dim_m` matrix per modality.
    pub modalities: Vec<Tensor>,
    /// `B × Σ dim_m`, rows are the per-sample concatenation of `modalities`.
    pub complete: Tensor,
    pub labels: Vec<usize>,
}

impl MultimodalBatch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalDataset {
    n_classes: usize,
    labels: Vec<usize>,
    modalities: Vec<Tensor>,
    split: Vec<Split>,
}

impl MultimodalDataset {
    /// Assembles a dataset from already-rendered parts, checking that every
    /// modality has one row per label.
    pub fn from_parts(
        n_classes: usize,
        labels: Vec<usize>,
        modalities: Vec<Tensor>,
        split: Vec<Split>,
    ) -> Result<Self> {
        if modalities.is_empty() {
            return Err(Error::contract("dataset needs at least one modality"));
        }
        for (m, t) in modalities.iter().enumerate() {
            let (rows, _) = t.dims2()?;
            if rows != labels.len() {
                return Err(Error::contract(format!(
                    "modality {m} has {rows} rows but there are {} labels",
                    labels.len()
                )));
            }
        }
        if split.len() != labels.len() {
            return Err(Error::contract("split markers must match sample count"));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::contract(format!(
                "label {y} out of range for {n_classes} classes"
            )));
        }
        Ok(MultimodalDataset {
            n_classes,
            labels,
            modalities,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn modality_count(&self) -> usize {
        self.modalities.len()
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.modalities.iter().map(Tensor::cols).collect()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// All `n × dim_m` observations of modality `m`.
    pub fn modality(&self, m: usize) -> &Tensor {
        &self.modalities[m]
    }

    pub fn split_of(&self, i: usize) -> Split {
        self.split[i]
    }

    pub fn splits(&self) -> &[Split] {
        &self.split
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.split[i] == split)
            .collect()
    }

    /// The complete observation of sample `i`: `(x_1, …, x_M)` concatenated.
    pub fn complete_row(&self, i: usize) -> Vec<f64> {
        self.modalities
            .iter()
            .flat_map(|t| t.row(i).iter().copied())
            .collect()
    }

    pub fn batch(&self, indices: &[usize]) -> Result<MultimodalBatch> {
        let modalities = self
            .modalities
            .iter()
            .map(|t| t.select_rows(indices))
            .collect::<Result<Vec<_>>>()?;
        let width: usize = modalities.iter().map(Tensor::cols).sum();
        let mut complete = Vec::with_capacity(indices.len() * width);
        for &i in indices {
            complete.extend(self.complete_row(i));
        }
        Ok(MultimodalBatch {
            modalities,
            complete: Tensor::matrix(indices.len(), width, complete)?,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        })
    }
}

fn gaussian_matrix(seed: u64, stream: u64, m: usize, rows: usize, cols: usize) -> Vec<f64> {
    let mut rng = keyed(seed, stream, m as u64, 0);
    let scale = 1.0 / (rows as f64).sqrt();
    (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut rng))
        .map(|v: f64| v * scale)
        .collect()
}

/// Rendering matrices of one modality, `dim × C` and `dim × style_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityRenderer {
    pub dim: usize,
    pub class_matrix: Vec<f64>,
    pub style_matrix: Vec<f64>,
    pub sigma: f64,
}

impl ModalityRenderer {
    fn for_config(config: &SynthConfig, m: usize) -> Self {
        let c = config.n_classes;
        if m == config.modality_dims.len() {
            // Label modality: identity class rendering, no style, no noise.
            let mut class_matrix = vec![0.0; c * c];
            for k in 0..c {
                class_matrix[k * c + k] = 1.0;
            }
            return ModalityRenderer {
                dim: c,
                class_matrix,
                style_matrix: vec![0.0; c * config.style_dim],
                sigma: 0.0,
            };
        }
        let dim = config.modality_dims[m];
        ModalityRenderer {
            dim,
            class_matrix: gaussian_matrix(config.seed, domain::CLASS_MATRIX, m, dim, c),
            style_matrix: gaussian_matrix(
                config.seed,
                domain::STYLE_MATRIX,
                m,
                dim,
                config.style_dim,
            ),
            sigma: config.noise_sigma.for_modality(m),
        }
    }

    /// Noise-free class mean of this modality.
    pub fn class_mean(&self, class: usize, n_classes: usize) -> Vec<f64> {
        (0..self.dim)
            .map(|r| self.class_matrix[r * n_classes + class])
            .collect()
    }
}

pub fn renderers(config: &SynthConfig) -> Vec<ModalityRenderer> {
    (0..config.observed_dims().len())
        .map(|m| ModalityRenderer::for_config(config, m))
        .collect()
}

/// Draws the class and style of sample `i`.
pub fn latent_of(config: &SynthConfig, i: usize) -> (usize, Vec<f64>) {
    let y = keyed(config.seed, domain::SAMPLE_LABEL, i as u64, 0).random_range(0..config.n_classes);
    let mut rng = keyed(config.seed, domain::SAMPLE_STYLE, i as u64, 0);
    let style = (0..config.style_dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    (y, style)
}

fn render(
    config: &SynthConfig,
    r: &ModalityRenderer,
    m: usize,
    i: usize,
    y: usize,
    style: &[f64],
) -> Vec<f64> {
    let c = config.n_classes;
    let sd = config.style_dim;
    let mut noise = keyed(config.seed, domain::SAMPLE_NOISE, i as u64, m as u64);
    (0..r.dim)
        .map(|row| {
            let mut v = r.class_matrix[row * c + y];
            for (k, s) in style.iter().enumerate() {
                v += r.style_matrix[row * sd + k] * s;
            }
            let eps: f64 = StandardNormal.sample(&mut noise);
            v + r.sigma * eps
        })
        .collect()
}

pub fn generate(config: &SynthConfig) -> Result<MultimodalDataset> {
    config.validate()?;
    let renderers = renderers(config);
    let n = config.n_samples;
    let n_train = config.train_count();
    let mut labels = Vec::with_capacity(n);
    let mut data: Vec<Vec<f64>> = renderers
        .iter()
        .map(|r| Vec::with_capacity(n * r.dim))
        .collect();
    for i in 0..n {
        let (y, style) = latent_of(config, i);
        labels.push(y);
        for (m, r) in renderers.iter().enumerate() {
            data[m].extend(render(config, r, m, i, y, &style));
        }
    }
    let modalities = data
        .into_iter()
        .zip(&renderers)
        .map(|(d, r)| Tensor::matrix(n, r.dim, d))
        .collect::<Result<Vec<_>>>()?;
    let split = (0..n)
        .map(|i| {
            if i < n_train {
                Split::Train
            } else {
                Split::Test
            }
        })
        .collect();
    MultimodalDataset::from_parts(config.n_classes, labels, modalities, split)
}
