use serde::{Deserialize, Serialize};

use super::{check_origins, NeighborhoodGraph, Origin};
use crate::error::{Error, Result};

/// Vertex and edge counts of one connected component with its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentScore {
    pub id: usize,
    pub n_r: usize,
    pub n_e: usize,
    pub edges_rr: usize,
    pub edges_ee: usize,
    pub edges_re: usize,
    pub consistency: f64,
    pub quality: f64,
}

impl ComponentScore {
    pub fn is_fundamental(&self) -> bool {
        self.consistency > 0.0 && self.quality > 0.0
    }

    pub fn size(&self) -> usize {
        self.n_r + self.n_e
    }

    pub fn edge_count(&self) -> usize {
        self.edges_rr + self.edges_ee + self.edges_re
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcaReport {
    pub components: Vec<ComponentScore>,
    pub network_consistency: f64,
    pub network_quality: f64,
    /// Vertices of fundamental components, ascending.
    pub fundamental: Vec<usize>,
    pub precision: f64,
    pub recall: f64,
    /// `3/(1/P + 1/R + 1/q)` with network quality `q`.
    pub score: f64,
    /// Vertices outside fundamental components, for plotting only.
    pub outliers: Vec<usize>,
}

/// `c = 1 − |nR − nE| / (nR + nE)`.
pub fn component_consistency(n_r: usize, n_e: usize) -> f64 {
    let total = n_r + n_e;
    if total == 0 {
        return 0.0;
    }
    1.0 - n_r.abs_diff(n_e) as f64 / total as f64
}

/// `q = 1 − (RR + EE) / (RR + EE + RE)`, and 0 without edges.
pub fn component_quality(edges_rr: usize, edges_ee: usize, edges_re: usize) -> f64 {
    let total = edges_rr + edges_ee + edges_re;
    if total == 0 {
        return 0.0;
    }
    1.0 - (edges_rr + edges_ee) as f64 / total as f64
}

/// `3/(1/P + 1/R + 1/q)` when all three are positive, else 0.
pub fn harmonic_score(precision: f64, recall: f64, quality: f64) -> f64 {
    if precision > 0.0 && recall > 0.0 && quality > 0.0 {
        3.0 / (1.0 / precision + 1.0 / recall + 1.0 / quality)
    } else {
        0.0
    }
}

fn tally(graph: &NeighborhoodGraph, origin: &[Origin]) -> Vec<ComponentScore> {
    let mut comps: Vec<ComponentScore> = graph
        .components()
        .iter()
        .enumerate()
        .map(|(id, verts)| {
            let n_r = verts
                .iter()
                .filter(|&&v| origin[v] == Origin::Reference)
                .count();
            ComponentScore {
                id,
                n_r,
                n_e: verts.len() - n_r,
                edges_rr: 0,
                edges_ee: 0,
                edges_re: 0,
                consistency: 0.0,
                quality: 0.0,
            }
        })
        .collect();
    for &(u, v) in graph.edges() {
        let c = &mut comps[graph.component_of(u)];
        match (origin[u], origin[v]) {
            (Origin::Reference, Origin::Reference) => c.edges_rr += 1,
            (Origin::Evaluation, Origin::Evaluation) => c.edges_ee += 1,
            _ => c.edges_re += 1,
        }
    }
    for c in &mut comps {
        c.consistency = component_consistency(c.n_r, c.n_e);
        c.quality = component_quality(c.edges_rr, c.edges_ee, c.edges_re);
    }
    comps
}

/// Network consistency and quality: the component formulas on the pooled
/// counts of the whole graph.
pub fn network_scores(components: &[ComponentScore]) -> (f64, f64) {
    let sum = |f: fn(&ComponentScore) -> usize| components.iter().map(f).sum::<usize>();
    (
        component_consistency(sum(|c| c.n_r), sum(|c| c.n_e)),
        component_quality(
            sum(|c| c.edges_rr),
            sum(|c| c.edges_ee),
            sum(|c| c.edges_re),
        ),
    )
}

/// Union of the vertex sets of components with `c > 0` and `q > 0`.
pub fn fundamental_components(
    graph: &NeighborhoodGraph,
    components: &[ComponentScore],
) -> Vec<usize> {
    let mut out: Vec<usize> = components
        .iter()
        .filter(|c| c.is_fundamental())
        .flat_map(|c| graph.components()[c.id].iter().copied())
        .collect();
    out.sort_unstable();
    out
}

/// `P = |F ∩ E| / |E|` and `R = |F ∩ R| / |R|`.
pub fn precision_recall(origin: &[Origin], fundamental: &[usize]) -> (f64, f64) {
    let count = |o: Origin| origin.iter().filter(|&&x| x == o).count();
    let in_f = |o: Origin| fundamental.iter().filter(|&&v| origin[v] == o).count();
    let (ne, nr) = (count(Origin::Evaluation), count(Origin::Reference));
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (
        ratio(in_f(Origin::Evaluation), ne),
        ratio(in_f(Origin::Reference), nr),
    )
}

/// Scores a graph whose vertex `v` has origin `origin[v]`.
pub fn score_graph(graph: &NeighborhoodGraph, origin: &[Origin]) -> Result<DcaReport> {
    if origin.len() != graph.vertex_count() {
        return Err(Error::contract(format!(
            "{} origin labels for {} vertices",
            origin.len(),
            graph.vertex_count()
        )));
    }
    check_origins(origin)?;
    let components = tally(graph, origin);
    let (network_consistency, network_quality) = network_scores(&components);
    let fundamental = fundamental_components(graph, &components);
    let (precision, recall) = precision_recall(origin, &fundamental);
    let mut in_f = vec![false; origin.len()];
    fundamental.iter().for_each(|&v| in_f[v] = true);
    let outliers = (0..origin.len()).filter(|&v| !in_f[v]).collect();
    Ok(DcaReport {
        components,
        network_consistency,
        network_quality,
        fundamental,
        precision,
        recall,
        score: harmonic_score(precision, recall, network_quality),
        outliers,
    })
}
