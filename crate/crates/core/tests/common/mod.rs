#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use siren_core::graph::{BayesNet, LinearGaussianCpd, Node, NodeKind};

/// Random DAG spec: node count, kinds bitmask, edge bitmask over ordered
/// pairs `i < j` of a hidden order, and a declaration permutation.
#[derive(Debug, Clone)]
pub struct DagSpec {
    pub n: usize,
    pub kinds: u32,
    pub edges: u64,
    pub perm: Vec<usize>,
}

pub fn dag_spec(max_nodes: usize) -> impl Strategy<Value = DagSpec> {
    (2..=max_nodes).prop_flat_map(|n| {
        (Just(n), any::<u32>(), any::<u64>(), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
            .prop_map(|(n, kinds, edges, perm)| DagSpec { n, kinds, edges, perm })
    })
}

impl DagSpec {
    /// Edges in hidden-order indices.
    fn pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut bit = 0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                if self.edges >> (bit % 64) & 1 == 1 {
                    out.push((i, j));
                }
                bit += 1;
            }
        }
        out
    }

    /// Node `k` of the hidden order is declared at position `perm[k]`.
    /// Node 0 of the hidden order is always latent.
    pub fn build(&self, with_cpds: bool) -> BayesNet {
        let mut declared: Vec<Option<Node>> = vec![None; self.n];
        for k in 0..self.n {
            let latent = k == 0 || self.kinds >> k & 1 == 1;
            let kind = if latent { NodeKind::Latent } else { NodeKind::Observed };
            declared[self.perm[k]] = Some(Node { id: format!("v{k}"), kind });
        }
        let nodes: Vec<Node> = declared.into_iter().map(Option::unwrap).collect();
        let edges: Vec<(String, String)> = self.pairs().iter().map(|&(a, b)| (format!("v{a}"), format!("v{b}"))).collect();
        let cpds = with_cpds.then(|| {
            let mut map = BTreeMap::new();
            for k in 0..self.n {
                let mut cpd = LinearGaussianCpd::new(0.1 * k as f64, 0.5 + 0.1 * k as f64);
                for &(a, b) in &self.pairs() {
                    if b == k {
                        cpd = cpd.coef(&format!("v{a}"), if (a + b) % 2 == 0 { 0.7 } else { -0.6 });
                    }
                }
                map.insert(format!("v{k}"), cpd);
            }
            map
        });
        BayesNet::new("random", nodes, &edges, cpds).expect("generated DAG is valid")
    }
}

pub fn ancestors_of(g: &BayesNet, start: &[usize]) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = start.iter().copied().collect();
    let mut stack: Vec<usize> = start.to_vec();
    while let Some(v) = stack.pop() {
        for &p in g.parents(v) {
            if seen.insert(p) {
                stack.push(p);
            }
        }
    }
    seen
}

/// d-separation by the moralized ancestral graph criterion.
pub fn dsep_moral(g: &BayesNet, a: usize, b: usize, given: &[usize]) -> bool {
    let mut start = vec![a, b];
    start.extend_from_slice(given);
    let keep = ancestors_of(g, &start);
    let mut adj: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    let mut link = |x: usize, y: usize| {
        adj.entry(x).or_default().insert(y);
        adj.entry(y).or_default().insert(x);
    };
    for &v in &keep {
        let pa: Vec<usize> = g.parents(v).iter().copied().filter(|p| keep.contains(p)).collect();
        for (i, &p) in pa.iter().enumerate() {
            link(p, v);
            for &q in &pa[i + 1..] {
                link(p, q);
            }
        }
    }
    let blocked: BTreeSet<usize> = given.iter().copied().collect();
    if blocked.contains(&a) || blocked.contains(&b) {
        return true;
    }
    let mut seen = BTreeSet::from([a]);
    let mut stack = vec![a];
    while let Some(v) = stack.pop() {
        if v == b {
            return false;
        }
        for &w in adj.get(&v).into_iter().flatten() {
            if !blocked.contains(&w) && seen.insert(w) {
                stack.push(w);
            }
        }
    }
    true
}
