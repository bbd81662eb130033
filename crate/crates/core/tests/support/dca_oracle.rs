//! Brute-force DCA scorer on bitmask graphs with exact fractions.
//!
//! Vertex sets are `u32` masks, components come from reachability closure
//! rather than union-find, and every score is an unreduced integer fraction.

use gmc::dca::{DcaReport, NeighborhoodGraph, Origin};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Frac {
    pub num: i64,
    pub den: i64,
}

impl Frac {
    pub const ZERO: Frac = Frac { num: 0, den: 1 };

    pub fn new(num: i64, den: i64) -> Self {
        if den == 0 {
            Frac::ZERO
        } else {
            Frac { num, den }
        }
    }

    pub fn is_positive(self) -> bool {
        self.num > 0
    }
}

/// `|x − num/den| ≤ 1e-12`, evaluated without dividing.
pub fn approx(x: f64, f: Frac) -> bool {
    (x * f.den as f64 - f.num as f64).abs() <= 1e-12 * f.den as f64
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleComponent {
    pub vertices: u32,
    pub n_r: i64,
    pub n_e: i64,
    pub rr: i64,
    pub ee: i64,
    pub re: i64,
    pub c: Frac,
    pub q: Frac,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleReport {
    pub components: Vec<OracleComponent>,
    pub c_net: Frac,
    pub q_net: Frac,
    pub fundamental: u32,
    pub precision: Frac,
    pub recall: Frac,
    pub score: Frac,
}

pub fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<u32> {
    let mut adj = vec![0u32; n];
    for &(u, v) in edges {
        adj[u] |= 1 << v;
        adj[v] |= 1 << u;
    }
    adj
}

/// Components ordered by their lowest vertex.
pub fn components(n: usize, adj: &[u32]) -> Vec<u32> {
    let mut seen = 0u32;
    let mut out = Vec::new();
    for v in 0..n {
        if seen & (1 << v) != 0 {
            continue;
        }
        let mut reach = 1u32 << v;
        loop {
            let mut next = reach;
            for (u, &a) in adj.iter().enumerate() {
                if reach & (1 << u) != 0 {
                    next |= a;
                }
            }
            if next == reach {
                break;
            }
            reach = next;
        }
        seen |= reach;
        out.push(reach);
    }
    out
}

fn pop(x: u32) -> i64 {
    x.count_ones() as i64
}

fn count_edges(adj: &[u32], within: u32, other: u32) -> i64 {
    // Σ over `within` of neighbours in `other`; halved by callers when the
    // two sets coincide.
    let mut s = 0;
    for (v, &a) in adj.iter().enumerate() {
        if within & (1 << v) != 0 {
            s += pop(a & other);
        }
    }
    s
}

fn consistency(n_r: i64, n_e: i64) -> Frac {
    Frac::new(n_r + n_e - (n_r - n_e).abs(), n_r + n_e)
}

fn quality(rr: i64, ee: i64, re: i64) -> Frac {
    let total = rr + ee + re;
    if total == 0 {
        Frac::ZERO
    } else {
        Frac::new(re, total)
    }
}

/// `3/(1/P + 1/R + 1/q)` kept as one fraction.
pub fn harmonic(p: Frac, r: Frac, q: Frac) -> Frac {
    if !(p.is_positive() && r.is_positive() && q.is_positive()) {
        return Frac::ZERO;
    }
    let num = 3 * p.num * r.num * q.num;
    let den = p.den * r.num * q.num + p.num * r.den * q.num + p.num * r.num * q.den;
    Frac::new(num, den)
}

/// Scores a graph whose reference vertices are the bits of `r_mask`.
pub fn score(n: usize, adj: &[u32], comps: &[u32], r_mask: u32) -> OracleReport {
    let all = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
    let e_mask = all & !r_mask;
    let mut components = Vec::with_capacity(comps.len());
    let mut fundamental = 0u32;
    let (mut tr, mut te, mut trr, mut tee, mut tre) = (0, 0, 0, 0, 0);
    for &cm in comps {
        let (cr, ce) = (cm & r_mask, cm & e_mask);
        let rr = count_edges(adj, cr, r_mask) / 2;
        let ee = count_edges(adj, ce, e_mask) / 2;
        let re = count_edges(adj, cr, e_mask);
        let comp = OracleComponent {
            vertices: cm,
            n_r: pop(cr),
            n_e: pop(ce),
            rr,
            ee,
            re,
            c: consistency(pop(cr), pop(ce)),
            q: quality(rr, ee, re),
        };
        if comp.c.is_positive() && comp.q.is_positive() {
            fundamental |= cm;
        }
        tr += comp.n_r;
        te += comp.n_e;
        trr += rr;
        tee += ee;
        tre += re;
        components.push(comp);
    }
    let precision = Frac::new(pop(fundamental & e_mask), pop(e_mask));
    let recall = Frac::new(pop(fundamental & r_mask), pop(r_mask));
    let q_net = quality(trr, tee, tre);
    OracleReport {
        components,
        c_net: consistency(tr, te),
        q_net,
        fundamental,
        precision,
        recall,
        score: harmonic(precision, recall, q_net),
    }
}

pub fn origins(n: usize, r_mask: u32) -> Vec<Origin> {
    (0..n)
        .map(|v| {
            if r_mask & (1 << v) != 0 {
                Origin::Reference
            } else {
                Origin::Evaluation
            }
        })
        .collect()
}

/// Whether a library report agrees with the oracle on every score and set.
pub fn agrees(graph: &NeighborhoodGraph, lib: &DcaReport, o: &OracleReport) -> bool {
    if lib.components.len() != o.components.len() {
        return false;
    }
    for (lc, oc) in lib.components.iter().zip(&o.components) {
        let verts: u32 = graph.components()[lc.id].iter().map(|&v| 1u32 << v).sum();
        if verts != oc.vertices
            || lc.n_r as i64 != oc.n_r
            || lc.n_e as i64 != oc.n_e
            || lc.edges_rr as i64 != oc.rr
            || lc.edges_ee as i64 != oc.ee
            || lc.edges_re as i64 != oc.re
            || !approx(lc.consistency, oc.c)
            || !approx(lc.quality, oc.q)
        {
            return false;
        }
    }
    let fund: u32 = lib.fundamental.iter().map(|&v| 1u32 << v).sum();
    fund == o.fundamental
        && approx(lib.network_consistency, o.c_net)
        && approx(lib.network_quality, o.q_net)
        && approx(lib.precision, o.precision)
        && approx(lib.recall, o.recall)
        && approx(lib.score, o.score)
}

/// Edge list of pair-mask `mask` over the `n(n-1)/2` vertex pairs.
pub fn edges_of(pairs: &[(usize, usize)], mask: u64) -> Vec<(usize, usize)> {
    pairs
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, &p)| p)
        .collect()
}

pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .collect()
}

/// Checks every edge subset and every two-sided labelling on `n` vertices.
/// Returns the number of labelled graphs checked, or the first disagreement.
pub fn exhaustive(n: usize) -> Result<u64, String> {
    let pairs = all_pairs(n);
    let mut checked = 0u64;
    for mask in 0..(1u64 << pairs.len()) {
        let edges = edges_of(&pairs, mask);
        let graph =
            NeighborhoodGraph::from_edges(n, edges.iter().copied()).map_err(|e| e.to_string())?;
        let adj = adjacency(n, &edges);
        let comps = components(n, &adj);
        for r_mask in 1..(1u32 << n) - 1 {
            let lib =
                gmc::dca::score_graph(&graph, &origins(n, r_mask)).map_err(|e| e.to_string())?;
            let o = score(n, &adj, &comps, r_mask);
            if !agrees(&graph, &lib, &o) {
                return Err(format!(
                    "n={n} edges={edges:?} r_mask={r_mask:#b}: {lib:?} vs {o:?}"
                ));
            }
            checked += 1;
        }
    }
    Ok(checked)
}
