//! Bayesian networks over latent and observed variables.
//!
//! A [`BayesNet`] is validated on construction: edges name declared nodes,
//! there are no self loops or duplicates, the graph is acyclic and, when
//! CPDs are attached, every node has exactly one linear-Gaussian CPD whose
//! coefficients cover its parent set exactly. Node indices follow
//! declaration order, and every ordering or tie-break in this module uses
//! that order.

mod dsep;
mod inverse;
mod structure;

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Reverse;

pub use dsep::{d_separated, d_separated_by_index};
pub use inverse::{faithful_inverse, faithful_inverse_with_order, InverseGraph};
pub use structure::{make_structure, Structure};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("unknown node id `{0}`")]
    UnknownNode(String),
    #[error("self loop on `{0}`")]
    SelfLoop(String),
    #[error("duplicate edge `{0}` -> `{1}`")]
    DuplicateEdge(String, String),
    #[error("cycle detected through `{0}`")]
    Cycle(String),
    #[error("cpd mismatch for `{node}`: {reason}")]
    CpdMismatch { node: String, reason: String },
    #[error("graph has no latent nodes")]
    NoLatents,
    #[error("invalid elimination order: {0}")]
    InvalidOrder(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Latent,
    Observed,
}

impl NodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Latent => "latent",
            NodeKind::Observed => "observed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
}

/// `value = intercept + Σ coef · parent + N(0, variance)`.
///
/// Coefficients keep the order in which they were declared so that text
/// round trips are stable.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianCpd {
    pub intercept: f64,
    pub variance: f64,
    pub coefficients: Vec<(String, f64)>,
}

impl LinearGaussianCpd {
    pub fn new(intercept: f64, variance: f64) -> Self {
        Self { intercept, variance, coefficients: Vec::new() }
    }

    pub fn coef(mut self, parent: &str, value: f64) -> Self {
        self.coefficients.push((parent.to_string(), value));
        self
    }

    pub fn coefficient(&self, parent: &str) -> Option<f64> {
        self.coefficients.iter().find(|(p, _)| p == parent).map(|(_, c)| *c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BayesNet {
    name: String,
    nodes: Vec<Node>,
    index: BTreeMap<String, usize>,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    cpds: Option<Vec<LinearGaussianCpd>>,
    topo: Vec<usize>,
}

impl BayesNet {
    /// Builds and validates a network. `edges` and CPD keys refer to node ids.
    pub fn new(
        name: &str,
        nodes: Vec<Node>,
        edges: &[(String, String)],
        cpds: Option<BTreeMap<String, LinearGaussianCpd>>,
    ) -> Result<Self, GraphError> {
        let mut index = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateNode(node.id.clone()));
            }
        }
        let lookup = |id: &str| index.get(id).copied().ok_or_else(|| GraphError::UnknownNode(id.to_string()));

        let n = nodes.len();
        let mut parents = alloc::vec![Vec::new(); n];
        let mut children = alloc::vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        let mut idx_edges = Vec::with_capacity(edges.len());
        for (src, dst) in edges {
            let (s, d) = (lookup(src)?, lookup(dst)?);
            if s == d {
                return Err(GraphError::SelfLoop(src.clone()));
            }
            if !seen.insert((s, d)) {
                return Err(GraphError::DuplicateEdge(src.clone(), dst.clone()));
            }
            idx_edges.push((s, d));
            parents[d].push(s);
            children[s].push(d);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        let topo = topological_sort(n, &idx_edges).map_err(|i| GraphError::Cycle(nodes[i].id.clone()))?;

        let cpds = match cpds {
            None => None,
            Some(mut map) => {
                let mut ordered = Vec::with_capacity(n);
                for (i, node) in nodes.iter().enumerate() {
                    let cpd = map.remove(&node.id).ok_or_else(|| GraphError::CpdMismatch {
                        node: node.id.clone(),
                        reason: "missing cpd".to_string(),
                    })?;
                    validate_cpd(&node.id, &cpd, &parents[i], &nodes)?;
                    ordered.push(cpd);
                }
                if let Some(extra) = map.keys().next() {
                    return Err(GraphError::UnknownNode(extra.clone()));
                }
                Some(ordered)
            }
        };

        Ok(Self { name: name.to_string(), nodes, index, edges: idx_edges, parents, children, cpds, topo })
    }

    pub fn builder(name: &str) -> BayesNetBuilder {
        BayesNetBuilder { name: name.to_string(), nodes: Vec::new(), edges: Vec::new(), cpds: BTreeMap::new() }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn id(&self, node: usize) -> &str {
        &self.nodes[node].id
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        self.nodes[node].kind
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Edges as node-index pairs, in declaration order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn cpds(&self) -> Option<&[LinearGaussianCpd]> {
        self.cpds.as_deref()
    }

    pub fn cpd(&self, node: usize) -> Option<&LinearGaussianCpd> {
        self.cpds.as_ref().map(|c| &c[node])
    }

    /// Latent node indices in declaration order; position `k` in this list is
    /// latent coordinate `k` of every model vector.
    pub fn latents(&self) -> Vec<usize> {
        self.of_kind(NodeKind::Latent)
    }

    /// Observed node indices in declaration order (the dataset column order).
    pub fn observed(&self) -> Vec<usize> {
        self.of_kind(NodeKind::Observed)
    }

    fn of_kind(&self, kind: NodeKind) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].kind == kind).collect()
    }

    /// Number of latent variables (K).
    pub fn latent_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Latent).count()
    }

    /// Number of observed variables (D).
    pub fn observed_count(&self) -> usize {
        self.nodes.len() - self.latent_count()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Topological order; ties are broken by declaration order.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    /// The same network with every CPD removed.
    pub fn without_cpds(&self) -> Self {
        Self { cpds: None, ..self.clone() }
    }

    /// Undirected moral graph: the skeleton plus an edge between every pair
    /// of co-parents. Pairs are stored as `(min, max)`.
    pub fn moralize(&self) -> BTreeSet<(usize, usize)> {
        let mut out = BTreeSet::new();
        for &(s, d) in &self.edges {
            out.insert((s.min(d), s.max(d)));
        }
        for pa in &self.parents {
            for (i, &p) in pa.iter().enumerate() {
                for &q in &pa[i + 1..] {
                    out.insert((p.min(q), p.max(q)));
                }
            }
        }
        out
    }

    pub(crate) fn from_parts(
        name: &str,
        nodes: Vec<Node>,
        edges: Vec<(usize, usize)>,
        cpds: Option<Vec<LinearGaussianCpd>>,
    ) -> Result<Self, GraphError> {
        let named: Vec<(String, String)> =
            edges.iter().map(|&(s, d)| (nodes[s].id.clone(), nodes[d].id.clone())).collect();
        let cpd_map = cpds.map(|c| nodes.iter().map(|n| n.id.clone()).zip(c).collect());
        Self::new(name, nodes, &named, cpd_map)
    }
}

fn validate_cpd(id: &str, cpd: &LinearGaussianCpd, parents: &[usize], nodes: &[Node]) -> Result<(), GraphError> {
    let mismatch = |reason: String| GraphError::CpdMismatch { node: id.to_string(), reason };
    if !(cpd.variance > 0.0) || !cpd.variance.is_finite() {
        return Err(mismatch(alloc::format!("variance {} is not strictly positive", cpd.variance)));
    }
    if !cpd.intercept.is_finite() {
        return Err(mismatch("intercept is not finite".to_string()));
    }
    let mut keys = BTreeSet::new();
    for (p, c) in &cpd.coefficients {
        if !keys.insert(p.as_str()) {
            return Err(mismatch(alloc::format!("coefficient for `{p}` given twice")));
        }
        if !c.is_finite() {
            return Err(mismatch(alloc::format!("coefficient for `{p}` is not finite")));
        }
    }
    let expected: BTreeSet<&str> = parents.iter().map(|&p| nodes[p].id.as_str()).collect();
    if keys != expected {
        return Err(mismatch("coefficient keys differ from the parent set".to_string()));
    }
    Ok(())
}

/// Kahn's algorithm with a min-heap on node index. Returns the index of a
/// node on a cycle on failure.
pub(crate) fn topological_sort(n: usize, edges: &[(usize, usize)]) -> Result<Vec<usize>, usize> {
    let mut indegree = alloc::vec![0usize; n];
    let mut out_edges = alloc::vec![Vec::new(); n];
    for &(s, d) in edges {
        indegree[d] += 1;
        out_edges[s].push(d);
    }
    let mut heap: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = heap.pop() {
        order.push(v);
        for &c in &out_edges[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                heap.push(Reverse(c));
            }
        }
    }
    if order.len() < n {
        return Err((0..n).find(|&i| indegree[i] > 0).unwrap_or(0));
    }
    Ok(order)
}

/// Incremental construction by node id, mainly for tests and examples.
#[derive(Debug, Clone)]
pub struct BayesNetBuilder {
    name: String,
    nodes: Vec<Node>,
    edges: Vec<(String, String)>,
    cpds: BTreeMap<String, LinearGaussianCpd>,
}

impl BayesNetBuilder {
    pub fn latent(mut self, id: &str) -> Self {
        self.nodes.push(Node { id: id.to_string(), kind: NodeKind::Latent });
        self
    }

    pub fn observed(mut self, id: &str) -> Self {
        self.nodes.push(Node { id: id.to_string(), kind: NodeKind::Observed });
        self
    }

    pub fn edge(mut self, src: &str, dst: &str) -> Self {
        self.edges.push((src.to_string(), dst.to_string()));
        self
    }

    pub fn cpd(mut self, id: &str, cpd: LinearGaussianCpd) -> Self {
        self.cpds.insert(id.to_string(), cpd);
        self
    }

    pub fn build(self) -> Result<BayesNet, GraphError> {
        let cpds = if self.cpds.is_empty() { None } else { Some(self.cpds) };
        BayesNet::new(&self.name, self.nodes, &self.edges, cpds)
    }
}
