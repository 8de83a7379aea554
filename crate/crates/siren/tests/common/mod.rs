#![allow(dead_code)]

use std::collections::BTreeMap;

use proptest::prelude::*;
use siren_core::graph::{BayesNet, LinearGaussianCpd, Node, NodeKind};

/// Random linear-Gaussian network: every later node may depend on every
/// earlier one. Observed nodes are declared leaves-last so each observed
/// node has at least one latent parent available.
pub fn gbn(max_nodes: usize) -> impl Strategy<Value = BayesNet> {
    (2..=max_nodes)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(any::<bool>(), n),
                prop::collection::vec(any::<bool>(), n * (n - 1) / 2),
                prop::collection::vec(-3.0f64..3.0, n * n),
                prop::collection::vec(1e-3f64..4.0, n),
            )
        })
        .prop_map(|(n, latent, edge_bits, coefs, vars)| {
            let nodes: Vec<Node> = (0..n)
                .map(|i| Node { id: format!("n{i}"), kind: if i == 0 || latent[i] { NodeKind::Latent } else { NodeKind::Observed } })
                .collect();
            let mut edges = Vec::new();
            let mut bit = 0;
            for j in 0..n {
                for i in 0..j {
                    if edge_bits[bit] {
                        edges.push((i, j));
                    }
                    bit += 1;
                }
            }
            let mut cpds = BTreeMap::new();
            for j in 0..n {
                let mut cpd = LinearGaussianCpd::new(coefs[j * n + j], vars[j]);
                for &(i, _) in edges.iter().filter(|&&(_, d)| d == j) {
                    cpd = cpd.coef(&format!("n{i}"), coefs[i * n + j]);
                }
                cpds.insert(format!("n{j}"), cpd);
            }
            let named: Vec<(String, String)> = edges.iter().map(|&(a, b)| (format!("n{a}"), format!("n{b}"))).collect();
            BayesNet::new("random", nodes, &named, Some(cpds)).unwrap()
        })
}

/// Whether every observed node has a latent parent (a model can be built).
pub fn modelable(g: &BayesNet) -> bool {
    g.observed_count() > 0 && g.observed().iter().all(|&x| g.parents(x).iter().any(|&p| g.kind(p) == NodeKind::Latent))
}
