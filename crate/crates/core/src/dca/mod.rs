//! Neighbourhood-graph comparison of an evaluation set `E` against a
//! reference set `R`.
//!
//! The pooled cloud `R ∪ E` is turned into an undirected graph, split into
//! connected components, and each component is scored by how balanced its
//! origins are (consistency) and how many of its edges join an `R` point to an
//! `E` point (quality). Components with both scores positive are
//! *fundamental*; precision and recall are the shares of `E` and `R` points
//! that land in fundamental components.
//!
//! Scoring only looks at the graph, so any construction can be plugged in via
//! [`NeighborhoodGraph::from_edges`]. [`build_graph`] provides a symmetric
//! k-nearest-neighbour graph.

mod graph;
mod score;

pub use graph::{build_graph, NeighborhoodGraph};
pub use score::{
    component_consistency, component_quality, fundamental_components, harmonic_score,
    network_scores, precision_recall, score_graph, ComponentScore, DcaReport,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    #[serde(rename = "R")]
    Reference,
    #[serde(rename = "E")]
    Evaluation,
}

impl Origin {
    pub fn flipped(self) -> Self {
        match self {
            Origin::Reference => Origin::Evaluation,
            Origin::Evaluation => Origin::Reference,
        }
    }
}

/// Points tagged with the set they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointCloud {
    points: Tensor,
    origin: Vec<Origin>,
}

impl LabeledPointCloud {
    pub fn new(points: Tensor, origin: Vec<Origin>) -> Result<Self> {
        let (n, _) = points.dims2()?;
        if origin.len() != n {
            return Err(Error::contract(format!(
                "{n} points but {} origin labels",
                origin.len()
            )));
        }
        check_origins(&origin)?;
        if !points.all_finite() {
            return Err(Error::contract("point coordinates must be finite"));
        }
        Ok(LabeledPointCloud { points, origin })
    }

    /// Stacks `R` above `E`: reference points get indices `0..|R|`.
    pub fn from_sets(reference: &Tensor, evaluation: &Tensor) -> Result<Self> {
        let (nr, dr) = reference.dims2()?;
        let (ne, de) = evaluation.dims2()?;
        if dr != de {
            return Err(Error::ShapeMismatch {
                op: "dca",
                lhs: reference.shape().to_vec(),
                rhs: evaluation.shape().to_vec(),
            });
        }
        let mut data = reference.data().to_vec();
        data.extend_from_slice(evaluation.data());
        let mut origin = vec![Origin::Reference; nr];
        origin.resize(nr + ne, Origin::Evaluation);
        Self::new(Tensor::matrix(nr + ne, dr, data)?, origin)
    }

    pub fn len(&self) -> usize {
        self.origin.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origin.is_empty()
    }

    pub fn points(&self) -> &Tensor {
        &self.points
    }

    pub fn origin(&self) -> &[Origin] {
        &self.origin
    }
}

pub(crate) fn check_origins(origin: &[Origin]) -> Result<()> {
    if !origin.contains(&Origin::Reference) || !origin.contains(&Origin::Evaluation) {
        return Err(Error::contract(
            "need at least one reference and one evaluation point",
        ));
    }
    Ok(())
}

/// Scores `E` against `R` on their symmetric `k`-NN graph.
pub fn evaluate_alignment(reference: &Tensor, evaluation: &Tensor, k: usize) -> Result<DcaReport> {
    let cloud = LabeledPointCloud::from_sets(reference, evaluation)?;
    let graph = build_graph(&cloud, k)?;
    score_graph(&graph, cloud.origin())
}
