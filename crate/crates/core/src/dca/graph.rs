use std::cmp::Ordering;

use rayon::prelude::*;

use super::LabeledPointCloud;
use crate::error::{Error, Result};

/// Undirected simple graph with its connected components.
///
/// Components are numbered by their smallest vertex, and each component's
/// vertex list is ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborhoodGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    component_of: Vec<usize>,
    components: Vec<Vec<usize>>,
}

struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        // The smaller root wins, so roots are component minima.
        match ra.cmp(&rb) {
            Ordering::Less => self.parent[rb] = ra,
            Ordering::Greater => self.parent[ra] = rb,
            Ordering::Equal => {}
        }
    }
}

impl NeighborhoodGraph {
    /// Builds a graph on vertices `0..n`. Edges may be given in either
    /// orientation; self-loops, out-of-range endpoints and repeated edges are
    /// rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut list: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::contract(format!("self-loop at vertex {u}")));
            }
            if u >= n || v >= n {
                return Err(Error::contract(format!(
                    "edge ({u}, {v}) leaves the vertex range 0..{n}"
                )));
            }
            list.push((u.min(v), u.max(v)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::contract(format!("duplicate edge {:?}", w[0])));
        }
        Ok(Self::from_sorted(n, list))
    }

    fn from_sorted(n: usize, edges: Vec<(usize, usize)>) -> Self {
        let mut sets = DisjointSets::new(n);
        for &(u, v) in &edges {
            sets.union(u, v);
        }
        let mut component_of = vec![usize::MAX; n];
        let mut components: Vec<Vec<usize>> = Vec::new();
        for v in 0..n {
            let root = sets.find(v);
            if component_of[root] == usize::MAX {
                component_of[root] = components.len();
                components.push(Vec::new());
            }
            let c = component_of[root];
            component_of[v] = c;
            components[c].push(v);
        }
        NeighborhoodGraph {
            n,
            edges,
            component_of,
            components,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    /// Edges as `(u, v)` with `u < v`, ascending.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn components(&self) -> &[Vec<usize>] {
        &self.components
    }

    pub fn component_of(&self, v: usize) -> usize {
        self.component_of[v]
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// The `k` nearest other vertices of `u`, ordered by (distance, index).
fn nearest(cloud: &LabeledPointCloud, u: usize, k: usize) -> Vec<usize> {
    let pts = cloud.points();
    let pu = pts.row(u);
    let mut cand: Vec<(f64, usize)> = (0..cloud.len())
        .filter(|&v| v != u)
        .map(|v| (squared_distance(pu, pts.row(v)), v))
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, order);
        cand.truncate(k);
    }
    cand.sort_unstable_by(order);
    cand.into_iter().map(|(_, v)| v).collect()
}

/// Symmetric k-NN graph under Euclidean distance: `u ~ v` iff either is among
/// the other's `k` nearest neighbours. Equal distances favour the lower
/// index. Rows are processed in parallel; the result does not depend on the
/// thread count.
pub fn build_graph(cloud: &LabeledPointCloud, k: usize) -> Result<NeighborhoodGraph> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return Err(Error::contract(format!(
            "k must lie in 1..{n} for {n} points, got {k}"
        )));
    }
    let mut edges: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|u| {
            nearest(cloud, u, k)
                .into_iter()
                .map(move |v| (u.min(v), u.max(v)))
        })
        .collect();
    edges.sort_unstable();
    edges.dedup();
    Ok(NeighborhoodGraph::from_sorted(n, edges))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dca::Origin;
    use crate::tensor::Tensor;

    fn cloud(rows: &[[f64; 2]]) -> LabeledPointCloud {
        let mut origin = vec![Origin::Reference; rows.len()];
        origin[0] = Origin::Evaluation;
        LabeledPointCloud::new(Tensor::from_rows(rows).unwrap(), origin).unwrap()
    }

    #[test]
    fn two_points_one_edge() {
        let g = build_graph(&cloud(&[[0.0, 0.0], [1.0, 1.0]]), 1).unwrap();
        assert_eq!(g.edges(), [(0, 1)]);
        assert_eq!(g.components().len(), 1);
    }

    #[test]
    fn collinear_points_follow_the_tie_break() {
        // 0 - 1 - 2 - 3 at unit spacing. Vertex 1 is equidistant from 0 and 2
        // and picks 0; vertex 2 picks 1 over 3. Vertex 3 only has 2.
        let g = build_graph(&cloud(&[[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]), 1).unwrap();
        assert_eq!(g.edges(), [(0, 1), (1, 2), (2, 3)]);
        // Mirrored coordinates give the same edges.
        let g = build_graph(&cloud(&[[3.0, 0.0], [2.0, 0.0], [1.0, 0.0], [0.0, 0.0]]), 1).unwrap();
        assert_eq!(g.edges(), [(0, 1), (1, 2), (2, 3)]);
    }

    #[test]
    fn duplicate_points_join_at_distance_zero() {
        let g = build_graph(&cloud(&[[1.0, 1.0], [5.0, 5.0], [1.0, 1.0], [5.0, 5.0]]), 1).unwrap();
        assert_eq!(g.edges(), [(0, 2), (1, 3)]);
        assert_eq!(g.components(), [vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn k_must_be_below_n() {
        let c = cloud(&[[0.0, 0.0], [1.0, 1.0]]);
        assert!(build_graph(&c, 2).is_err());
        assert!(build_graph(&c, 0).is_err());
    }

    #[test]
    fn from_edges_validates() {
        assert!(NeighborhoodGraph::from_edges(3, [(0, 0)]).is_err());
        assert!(NeighborhoodGraph::from_edges(3, [(0, 3)]).is_err());
        assert!(NeighborhoodGraph::from_edges(3, [(0, 1), (1, 0)]).is_err());
        let g = NeighborhoodGraph::from_edges(5, [(4, 2), (1, 0)]).unwrap();
        assert_eq!(g.edges(), [(0, 1), (2, 4)]);
        assert_eq!(g.components(), [vec![0, 1], vec![2, 4], vec![3]]);
        assert_eq!(g.component_of(4), 1);
    }
}
