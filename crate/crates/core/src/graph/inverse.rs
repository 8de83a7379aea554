//! Faithful inversion of a Bayesian network for the inference network.
//!
//! The procedure simulates variable elimination on the moral graph. Latents
//! are eliminated one at a time; at elimination time a latent's remaining
//! neighbours become its parents in the inverse and are connected pairwise
//! (fill-in). Observed nodes are never eliminated and end up as sources.
//! Sampling order in the inverse is the reverse of the elimination order.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::{BayesNet, GraphError, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InverseGraph {
    node_count: usize,
    latents: Vec<usize>,
    observed: Vec<usize>,
    parents: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    latent_order: Vec<usize>,
}

impl InverseGraph {
    /// The trivially faithful inverse: every latent conditioned on all
    /// observations and all latents preceding it in `latent_order`.
    pub fn fully_connected(g: &BayesNet, latent_order: &[usize]) -> Self {
        let observed = g.observed();
        let mut parents = vec![Vec::new(); g.len()];
        for (pos, &z) in latent_order.iter().enumerate() {
            let mut pa: Vec<usize> = observed.iter().copied().chain(latent_order[..pos].iter().copied()).collect();
            pa.sort_unstable();
            parents[z] = pa;
        }
        Self::from_parents(g, parents, latent_order.to_vec())
    }

    fn from_parents(g: &BayesNet, parents: Vec<Vec<usize>>, latent_order: Vec<usize>) -> Self {
        let mut edges = Vec::new();
        for &z in &latent_order {
            edges.extend(parents[z].iter().map(|&p| (p, z)));
        }
        Self { node_count: g.len(), latents: g.latents(), observed: g.observed(), parents, edges, latent_order }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Latent node indices in declaration order (coordinate order of z).
    pub fn latents(&self) -> &[usize] {
        &self.latents
    }

    /// Observed node indices in declaration order (coordinate order of x).
    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    /// Inverse parents of `node`; always empty for observed nodes.
    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Topological order of the latents under the inverse graph.
    pub fn latent_order(&self) -> &[usize] {
        &self.latent_order
    }

    /// Pairs `(z, other)` for which the inverse factorization asserts
    /// `z ⟂ other | parents(z)` but `g` does not d-separate them. An empty
    /// result means the inverse is faithful to `g`.
    pub fn faithfulness_violations(&self, g: &BayesNet) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (pos, &z) in self.latent_order.iter().enumerate() {
            let pa = &self.parents[z];
            let earlier = self.observed.iter().chain(self.latent_order[..pos].iter());
            for &other in earlier {
                if !pa.contains(&other) && !super::d_separated_by_index(g, z, other, pa) {
                    out.push((z, other));
                }
            }
        }
        out
    }
}

/// Inverse built by eliminating latents in `g`'s topological order.
pub fn faithful_inverse(g: &BayesNet) -> Result<InverseGraph, GraphError> {
    let order: Vec<usize> = g.topological_order().iter().copied().filter(|&v| g.kind(v) == NodeKind::Latent).collect();
    faithful_inverse_with_order(g, &order)
}

/// Inverse built from an explicit elimination order, which must list every
/// latent exactly once.
pub fn faithful_inverse_with_order(g: &BayesNet, elimination: &[usize]) -> Result<InverseGraph, GraphError> {
    let latents = g.latents();
    if latents.is_empty() {
        return Err(GraphError::NoLatents);
    }
    let as_set: BTreeSet<usize> = elimination.iter().copied().collect();
    if as_set.len() != elimination.len() || as_set != latents.iter().copied().collect() {
        return Err(GraphError::InvalidOrder("every latent must appear exactly once".into()));
    }

    let n = g.len();
    let mut adjacency: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (a, b) in g.moralize() {
        adjacency[a].insert(b);
        adjacency[b].insert(a);
    }
    let mut parents = vec![Vec::new(); n];
    for &v in elimination {
        let neighbours: Vec<usize> = adjacency[v].iter().copied().collect();
        for (i, &a) in neighbours.iter().enumerate() {
            adjacency[a].remove(&v);
            for &b in &neighbours[i + 1..] {
                adjacency[a].insert(b);
                adjacency[b].insert(a);
            }
        }
        adjacency[v].clear();
        parents[v] = neighbours;
    }
    let latent_order: Vec<usize> = elimination.iter().rev().copied().collect();
    Ok(InverseGraph::from_parents(g, parents, latent_order))
}
