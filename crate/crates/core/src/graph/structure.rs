use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::{BayesNet, NodeKind};

/// Which dependency structure a SIReN model encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Structure {
    /// Independent latents, every observation conditioned on all latents.
    Independent,
    /// Complete DAG over the latents in the true topological order, every
    /// observation conditioned on all latents.
    FullyConnected,
    /// The network as given.
    True,
}

impl Structure {
    pub const ALL: [Structure; 3] = [Structure::Independent, Structure::FullyConnected, Structure::True];

    pub fn as_str(self) -> &'static str {
        match self {
            Structure::Independent => "ind",
            Structure::FullyConnected => "fc",
            Structure::True => "true",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Structure {
    type Err = alloc::string::String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ind" => Ok(Structure::Independent),
            "fc" => Ok(Structure::FullyConnected),
            "true" => Ok(Structure::True),
            other => Err(alloc::format!("unknown structure `{other}` (expected ind, fc or true)")),
        }
    }
}

/// Derives the graph a model variant encodes. `True` returns `g` unchanged;
/// the other variants drop CPDs since their edge sets no longer match them.
pub fn make_structure(variant: Structure, g: &BayesNet) -> BayesNet {
    if variant == Structure::True {
        return g.clone();
    }
    let latent_topo: Vec<usize> = g.topological_order().iter().copied().filter(|&v| g.kind(v) == NodeKind::Latent).collect();
    let mut edges = Vec::new();
    if variant == Structure::FullyConnected {
        for (i, &a) in latent_topo.iter().enumerate() {
            for &b in &latent_topo[i + 1..] {
                edges.push((a, b));
            }
        }
    }
    let latents = g.latents();
    for &x in &g.observed() {
        edges.extend(latents.iter().map(|&z| (z, x)));
    }
    BayesNet::from_parts(g.name(), g.nodes().to_vec(), edges, None)
        .expect("edges of a derived structure follow a topological order")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BayesNet {
        BayesNet::builder("s")
            .latent("z1")
            .latent("z2")
            .latent("z3")
            .observed("x1")
            .observed("x2")
            .edge("z1", "z2")
            .edge("z2", "z3")
            .edge("z3", "x1")
            .edge("z1", "x2")
            .build()
            .unwrap()
    }

    #[test]
    fn independent_variant() {
        let g = make_structure(Structure::Independent, &sample());
        let latent_edges = g.edges().iter().filter(|&&(s, d)| g.kind(s) == NodeKind::Latent && g.kind(d) == NodeKind::Latent).count();
        assert_eq!(latent_edges, 0);
        for x in g.observed() {
            assert_eq!(g.parents(x), &[0, 1, 2]);
        }
        assert_eq!(g.latent_count(), 3);
    }

    #[test]
    fn fully_connected_variant() {
        let g = make_structure(Structure::FullyConnected, &sample());
        let latent_edges: Vec<_> =
            g.edges().iter().copied().filter(|&(s, d)| g.kind(s) == NodeKind::Latent && g.kind(d) == NodeKind::Latent).collect();
        assert_eq!(latent_edges, alloc::vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn true_variant_is_identity() {
        let g = sample();
        assert_eq!(make_structure(Structure::True, &g), g);
    }

    #[test]
    fn parse_names() {
        for s in Structure::ALL {
            assert_eq!(s.as_str().parse::<Structure>().unwrap(), s);
        }
        assert!("dense".parse::<Structure>().is_err());
    }
}
