//! Multimodal NT-Xent.
//!
//! For a mini-batch of `B` samples observed through `M` modalities, each
//! modality-specific latent `z_m^i` is contrasted against the complete latent
//! `z_{1:M}^i` of the same sample. With `s_{a,b}(i,j) = exp(cos(z_a^i, z_b^j)/τ)`
//! the negative mass of the pair is
//!
//! ```text
//! Ω_m(i) = Σ_{j≠i} [ s_{m,1:M}(i,j) + s_{m,m}(i,j) + s_{1:M,1:M}(i,j) ]
//! ```
//!
//! and the pair loss is `l_m(i) = -log(s_{m,1:M}(i,i) / Ω_m(i))`. The batch
//! loss is the plain double sum `Σ_m Σ_i l_m(i)`; it is not averaged.
//!
//! The ablated variant keeps only the complete-vs-complete block in the
//! negative mass, `Ω*(i) = Σ_{j≠i} s_{1:M,1:M}(i,j)`, which no longer depends
//! on `m`.
//!
//! Modality and sample indices are zero-based throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::tape::NORM_EPS;
use crate::tensor::{Tape, Tensor, Var};

pub const DEFAULT_TEMPERATURE: f64 = 0.1;

/// Positive temperature dividing cosine similarities.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau.is_finite() {
            Ok(Temperature(tau))
        } else {
            Err(Error::config(
                "tau",
                format!("temperature must be in (0, inf), got {tau}"),
            ))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Temperature(DEFAULT_TEMPERATURE)
    }
}

impl TryFrom<f64> for Temperature {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Temperature::new(v)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

/// Which negatives enter the contrastive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossVariant {
    #[default]
    Full,
    Ablated,
}

impl std::fmt::Display for LossVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossVariant::Full => "full",
            LossVariant::Ablated => "ablated",
        })
    }
}

impl std::str::FromStr for LossVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(LossVariant::Full),
            "ablated" => Ok(LossVariant::Ablated),
            other => Err(Error::config(
                "loss_variant",
                format!("expected `full` or `ablated`, got `{other}`"),
            )),
        }
    }
}

/// Cosine of the angle between two vectors, clamped to `[-1, 1]`.
///
/// A vector with norm at or below `1e-12` is rejected; `index` in the error is
/// `0` for `u` and `1` for `v`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch {
            op: "cosine_similarity",
            lhs: vec![u.len()],
            rhs: vec![v.len()],
        });
    }
    let nu = norm(u);
    let nv = norm(v);
    if !(nu > NORM_EPS) {
        return Err(Error::DegenerateVector { index: 0, norm: nu });
    }
    if !(nv > NORM_EPS) {
        return Err(Error::DegenerateVector { index: 1, norm: nv });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

/// `exp(cos(a, b) / τ)`.
pub fn similarity(a: &[f64], b: &[f64], tau: Temperature) -> Result<f64> {
    Ok((cosine_similarity(a, b)? / tau.get()).exp())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Which representation of a sample a latent row came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Modality(usize),
    Complete,
}

/// Latent rows of one mini-batch: `M` modality-specific `B×s` matrices and
/// the complete `B×s` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationBatch {
    per_modality: Vec<Tensor>,
    complete: Tensor,
}

fn check_shapes(per_modality: &[(usize, usize)], complete: (usize, usize)) -> Result<()> {
    if per_modality.is_empty() {
        return Err(Error::contract(
            "a representation batch needs at least one modality",
        ));
    }
    if let Some(&(b, s)) = per_modality.iter().find(|&&shape| shape != complete) {
        return Err(Error::ShapeMismatch {
            op: "representation_batch",
            lhs: vec![b, s],
            rhs: vec![complete.0, complete.1],
        });
    }
    if complete.0 < 2 {
        return Err(Error::contract(
            "no negatives available: batch size must be at least 2",
        ));
    }
    Ok(())
}

impl RepresentationBatch {
    pub fn new(per_modality: Vec<Tensor>, complete: Tensor) -> Result<Self> {
        let dims: Vec<(usize, usize)> = per_modality
            .iter()
            .map(Tensor::dims2)
            .collect::<Result<_>>()?;
        check_shapes(&dims, complete.dims2()?)?;
        Ok(RepresentationBatch {
            per_modality,
            complete,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.complete.rows()
    }

    pub fn modality_count(&self) -> usize {
        self.per_modality.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.complete.cols()
    }

    pub fn modality(&self, m: usize) -> &Tensor {
        &self.per_modality[m]
    }

    pub fn complete(&self) -> &Tensor {
        &self.complete
    }

    fn row(&self, block: Block, i: usize) -> &[f64] {
        match block {
            Block::Modality(m) => self.per_modality[m].row(i),
            Block::Complete => self.complete.row(i),
        }
    }

    fn check_index(&self, m: usize, i: usize) -> Result<()> {
        if m >= self.modality_count() {
            return Err(Error::contract(format!(
                "modality {m} out of range for {} modalities",
                self.modality_count()
            )));
        }
        if i >= self.batch_size() {
            return Err(Error::contract(format!(
                "sample {i} out of range for batch size {}",
                self.batch_size()
            )));
        }
        Ok(())
    }

    fn sim(&self, a: Block, i: usize, b: Block, j: usize, tau: Temperature) -> Result<f64> {
        similarity(self.row(a, i), self.row(b, j), tau).map_err(|e| match e {
            Error::DegenerateVector { index, norm } => Error::DegenerateVector {
                index: if index == 0 { i } else { j },
                norm,
            },
            other => other,
        })
    }

    /// Evaluates the loss without recording gradients.
    pub fn loss(&self, tau: Temperature, variant: LossVariant) -> Result<f64> {
        let mut tape = Tape::without_grad();
        let vars = RepresentationVars::from_batch(&mut tape, self, false);
        let out = contrastive_loss(&mut tape, &vars, tau, variant)?;
        tape.item(out.total)
    }

    /// Per-pair losses `l_m(i)` in modality-major order, without gradients.
    pub fn pair_losses(&self, tau: Temperature, variant: LossVariant) -> Result<Vec<f64>> {
        let mut tape = Tape::without_grad();
        let vars = RepresentationVars::from_batch(&mut tape, self, false);
        let out = contrastive_loss(&mut tape, &vars, tau, variant)?;
        Ok(tape.value(out.terms).data().to_vec())
    }
}

/// `Ω_m(i)`, summed term by term exactly as the formula is written.
pub fn negative_mass(
    batch: &RepresentationBatch,
    m: usize,
    i: usize,
    tau: Temperature,
) -> Result<f64> {
    batch.check_index(m, i)?;
    let mut total = 0.0;
    for j in (0..batch.batch_size()).filter(|&j| j != i) {
        total += batch.sim(Block::Modality(m), i, Block::Complete, j, tau)?;
        total += batch.sim(Block::Modality(m), i, Block::Modality(m), j, tau)?;
        total += batch.sim(Block::Complete, i, Block::Complete, j, tau)?;
    }
    Ok(total)
}

/// `Ω*(i)`: only complete-vs-complete negatives.
pub fn ablated_negative_mass(
    batch: &RepresentationBatch,
    i: usize,
    tau: Temperature,
) -> Result<f64> {
    batch.check_index(0, i)?;
    let mut total = 0.0;
    for j in (0..batch.batch_size()).filter(|&j| j != i) {
        total += batch.sim(Block::Complete, i, Block::Complete, j, tau)?;
    }
    Ok(total)
}

/// `l_m(i) = -log(s_{m,1:M}(i,i) / Ω_m(i))`.
pub fn pair_loss(batch: &RepresentationBatch, m: usize, i: usize, tau: Temperature) -> Result<f64> {
    let omega = negative_mass(batch, m, i, tau)?;
    let positive = batch.sim(Block::Modality(m), i, Block::Complete, i, tau)?;
    Ok(-(positive / omega).ln())
}

/// Pair loss of the ablated objective.
pub fn ablated_pair_loss(
    batch: &RepresentationBatch,
    m: usize,
    i: usize,
    tau: Temperature,
) -> Result<f64> {
    batch.check_index(m, i)?;
    let omega = ablated_negative_mass(batch, i, tau)?;
    let positive = batch.sim(Block::Modality(m), i, Block::Complete, i, tau)?;
    Ok(-(positive / omega).ln())
}

/// Tape handles for the latent matrices of one mini-batch.
#[derive(Debug, Clone)]
pub struct RepresentationVars {
    pub per_modality: Vec<Var>,
    pub complete: Var,
}

impl RepresentationVars {
    pub fn new(tape: &Tape, per_modality: Vec<Var>, complete: Var) -> Result<Self> {
        let dims: Vec<(usize, usize)> = per_modality
            .iter()
            .map(|&v| tape.value(v).dims2())
            .collect::<Result<_>>()?;
        check_shapes(&dims, tape.value(complete).dims2()?)?;
        Ok(RepresentationVars {
            per_modality,
            complete,
        })
    }

    /// Records the batch's matrices as leaves.
    pub fn from_batch(tape: &mut Tape, batch: &RepresentationBatch, requires_grad: bool) -> Self {
        let per_modality = batch
            .per_modality
            .iter()
            .map(|t| tape.leaf(t.clone().with_requires_grad(requires_grad)))
            .collect();
        let complete = tape.leaf(batch.complete.clone().with_requires_grad(requires_grad));
        RepresentationVars {
            per_modality,
            complete,
        }
    }
}

/// Differentiable loss and its individual pair terms.
#[derive(Debug, Clone, Copy)]
pub struct ContrastiveLoss {
    /// Scalar `Σ_m Σ_i l_m(i)`.
    pub total: Var,
    /// `[M·B]` vector of `l_m(i)`, modality-major.
    pub terms: Var,
    pub term_count: usize,
}

impl ContrastiveLoss {
    /// `total / (M·B)`, comparable across batch sizes and modality counts.
    pub fn per_term_mean(&self, tape: &Tape) -> Result<f64> {
        Ok(tape.item(self.total)? / self.term_count as f64)
    }
}

pub fn mnt_xent(
    tape: &mut Tape,
    reps: &RepresentationVars,
    tau: Temperature,
) -> Result<ContrastiveLoss> {
    contrastive_loss(tape, reps, tau, LossVariant::Full)
}

pub fn mnt_xent_ablated(
    tape: &mut Tape,
    reps: &RepresentationVars,
    tau: Temperature,
) -> Result<ContrastiveLoss> {
    contrastive_loss(tape, reps, tau, LossVariant::Ablated)
}

/// Records the contrastive loss on `tape`.
///
/// Only the `(m, 1:M)`, `(m, m)` and `(1:M, 1:M)` similarity blocks are ever
/// formed, so work grows linearly in `M`. `log Ω_m(i)` is evaluated as a
/// row-wise log-sum-exp over the concatenated blocks with the diagonal masked
/// to `-inf`, which stays finite for any temperature.
pub fn contrastive_loss(
    tape: &mut Tape,
    reps: &RepresentationVars,
    tau: Temperature,
    variant: LossVariant,
) -> Result<ContrastiveLoss> {
    let b = tape.value(reps.complete).rows();
    let inv_tau = 1.0 / tau.get();

    let mut mask = Tensor::zeros(vec![b, b])?;
    for i in 0..b {
        mask.data_mut()[i * b + i] = f64::NEG_INFINITY;
    }
    let mask = tape.constant(mask);

    let unit_c = tape.normalize_rows(reps.complete)?;
    let unit_c_t = tape.transpose(unit_c)?;

    // cos/τ for one block, and the same with j = i removed.
    let block = |tape: &mut Tape, lhs: Var, rhs_t: Var| -> Result<(Var, Var)> {
        let cos = tape.matmul(lhs, rhs_t)?;
        let scaled = tape.scale(cos, inv_tau);
        let negatives = tape.add(scaled, mask)?;
        Ok((scaled, negatives))
    };

    let (_, neg_cc) = block(tape, unit_c, unit_c_t)?;
    let ablated_log_omega = match variant {
        LossVariant::Ablated => Some(tape.log_sum_exp_rows(neg_cc)?),
        LossVariant::Full => None,
    };

    let mut terms = Vec::with_capacity(reps.per_modality.len());
    for &z_m in &reps.per_modality {
        let unit_m = tape.normalize_rows(z_m)?;
        let (scaled_mc, neg_mc) = block(tape, unit_m, unit_c_t)?;
        let log_omega = match ablated_log_omega {
            Some(shared) => shared,
            None => {
                let unit_m_t = tape.transpose(unit_m)?;
                let (_, neg_mm) = block(tape, unit_m, unit_m_t)?;
                let all = tape.concat(&[neg_mc, neg_mm, neg_cc], 1)?;
                tape.log_sum_exp_rows(all)?
            }
        };
        let positive = tape.diag(scaled_mc)?;
        terms.push(tape.sub(log_omega, positive)?);
    }
    let terms = tape.concat(&terms, 0)?;
    let total = tape.sum(terms);
    Ok(ContrastiveLoss {
        total,
        terms,
        term_count: reps.per_modality.len() * b,
    })
}
