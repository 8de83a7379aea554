//! Ancestral sampling from linear-Gaussian networks, closed-form density
//! oracles and datasets.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::diff::Tensor;
use crate::graph::BayesNet;
use crate::linalg::{self, LinalgError};
use crate::math;
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("network `{0}` has no CPDs")]
    MissingCpd(String),
    #[error("covariance is singular: {0}")]
    Singular(#[from] LinalgError),
    #[error("requested {requested} rows but only {available} are available")]
    InsufficientRows { requested: usize, available: usize },
    #[error("expected row width {expected}, got {got}")]
    Width { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub gbn: String,
    pub seed: u64,
    pub n: usize,
}

/// Observed samples, one column per observed node in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub columns: Vec<String>,
    pub rows: Tensor,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(columns: Vec<String>, rows: Tensor, provenance: Provenance) -> Result<Self, DataError> {
        if rows.cols() != columns.len() {
            return Err(DataError::Width { expected: columns.len(), got: rows.cols() });
        }
        Ok(Self { columns, rows, provenance })
    }

    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.rows() == 0
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }
}

/// `n` joint draws, one column per node in declaration order. Nodes are
/// visited in topological order; a node is `intercept + Σ coef · parent +
/// N(0, variance)`.
pub fn ancestral_sample(g: &BayesNet, n: usize, seed: u64) -> Result<Tensor, DataError> {
    let cpds = g.cpds().ok_or_else(|| DataError::MissingCpd(g.name().to_string()))?;
    let coefs = parent_coefficients(g);
    let mut rng = rng::seeded(seed);
    let mut out = Tensor::zeros(n, g.len());
    for r in 0..n {
        let row = out.row_slice_mut(r);
        for &v in g.topological_order() {
            let cpd = &cpds[v];
            let mean: f64 = cpd.intercept + coefs[v].iter().map(|&(p, c)| c * row[p]).sum::<f64>();
            row[v] = mean + math::sqrt(cpd.variance) * rng::normal(&mut rng);
        }
    }
    Ok(out)
}

// (parent index, coefficient) pairs for every node.
fn parent_coefficients(g: &BayesNet) -> Vec<Vec<(usize, f64)>> {
    let cpds = g.cpds().expect("checked by caller");
    (0..g.len())
        .map(|v| cpds[v].coefficients.iter().map(|(p, c)| (g.index_of(p).expect("validated parent"), *c)).collect())
        .collect()
}

/// Drops latent columns, keeping observed columns in declaration order.
pub fn project_observed(table: &Tensor, g: &BayesNet, seed: u64) -> Dataset {
    let observed = g.observed();
    let rows = Tensor::from_fn(table.rows(), observed.len(), |r, c| table.get(r, observed[c]));
    Dataset {
        columns: observed.iter().map(|&o| g.id(o).to_string()).collect(),
        rows,
        provenance: Provenance { gbn: g.name().to_string(), seed, n: table.rows() },
    }
}

/// Mean vector and covariance of the joint Gaussian, indexed by node.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGaussian {
    pub mean: Vec<f64>,
    pub cov: Tensor,
}

impl JointGaussian {
    pub fn of(g: &BayesNet) -> Result<Self, DataError> {
        let cpds = g.cpds().ok_or_else(|| DataError::MissingCpd(g.name().to_string()))?;
        let coefs = parent_coefficients(g);
        let n = g.len();
        let mut mean = alloc::vec![0.0; n];
        let mut cov = Tensor::zeros(n, n);
        let mut done: Vec<usize> = Vec::with_capacity(n);
        for &v in g.topological_order() {
            mean[v] = cpds[v].intercept + coefs[v].iter().map(|&(p, c)| c * mean[p]).sum::<f64>();
            for &u in &done {
                let c: f64 = coefs[v].iter().map(|&(p, w)| w * cov.get(p, u)).sum();
                cov.set(v, u, c);
                cov.set(u, v, c);
            }
            let var: f64 = cpds[v].variance + coefs[v].iter().map(|&(p, w)| w * cov.get(p, v)).sum::<f64>();
            cov.set(v, v, var);
            done.push(v);
        }
        Ok(Self { mean, cov })
    }

    /// The Gaussian over the given node indices.
    pub fn marginal(&self, nodes: &[usize]) -> Self {
        Self {
            mean: nodes.iter().map(|&i| self.mean[i]).collect(),
            cov: Tensor::from_fn(nodes.len(), nodes.len(), |r, c| self.cov.get(nodes[r], nodes[c])),
        }
    }

    pub fn logpdf(&self, x: &[f64]) -> Result<f64, DataError> {
        if x.len() != self.mean.len() {
            return Err(DataError::Width { expected: self.mean.len(), got: x.len() });
        }
        Ok(linalg::mvn_logpdf(x, &self.mean, &self.cov)?)
    }
}

/// Exact log-density of a full assignment (one value per node, declaration
/// order), as the sum of the conditional densities.
pub fn exact_joint_logp(g: &BayesNet, assignment: &[f64]) -> Result<f64, DataError> {
    let cpds = g.cpds().ok_or_else(|| DataError::MissingCpd(g.name().to_string()))?;
    if assignment.len() != g.len() {
        return Err(DataError::Width { expected: g.len(), got: assignment.len() });
    }
    let coefs = parent_coefficients(g);
    Ok((0..g.len())
        .map(|v| {
            let mean = cpds[v].intercept + coefs[v].iter().map(|&(p, c)| c * assignment[p]).sum::<f64>();
            math::gaussian_logpdf(assignment[v], mean, 0.5 * math::ln(cpds[v].variance))
        })
        .sum())
}

/// Exact log-density of an observed row (observed nodes in declaration
/// order) with the latents marginalized out.
pub fn exact_marginal_logp(g: &BayesNet, observed_row: &[f64]) -> Result<f64, DataError> {
    JointGaussian::of(g)?.marginal(&g.observed()).logpdf(observed_row)
}

/// Seeded shuffle, then the first `n_train` rows and the next `n_test`.
pub fn split(d: &Dataset, n_train: usize, n_test: usize, seed: u64) -> Result<(Dataset, Dataset), DataError> {
    let requested = n_train + n_test;
    if requested > d.len() {
        return Err(DataError::InsufficientRows { requested, available: d.len() });
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.shuffle(&mut rng::seeded(seed));
    let part = |idx: &[usize]| Dataset { columns: d.columns.clone(), rows: d.rows.select_rows(idx), provenance: d.provenance.clone() };
    Ok((part(&order[..n_train]), part(&order[n_train..requested])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LinearGaussianCpd;

    fn chain() -> BayesNet {
        BayesNet::builder("chain")
            .latent("z")
            .observed("x")
            .edge("z", "x")
            .cpd("z", LinearGaussianCpd::new(0.0, 1.0))
            .cpd("x", LinearGaussianCpd::new(0.0, 1.0).coef("z", 2.0))
            .build()
            .unwrap()
    }

    #[test]
    fn single_node_mean() {
        let g = BayesNet::builder("one").observed("a").cpd("a", LinearGaussianCpd::new(0.0, 1.0)).build().unwrap();
        let t = ancestral_sample(&g, 100_000, 3).unwrap();
        assert!(t.sum().abs() / 1e5 < 4.0 / math::sqrt(1e5));
    }

    #[test]
    fn chain_variance_and_determinism() {
        let g = chain();
        let t = ancestral_sample(&g, 100_000, 11).unwrap();
        let x: Vec<f64> = (0..t.rows()).map(|r| t.get(r, 1)).collect();
        let var = math::powi(math::sample_sd(&x), 2);
        assert!((var / 5.0 - 1.0).abs() < 0.05, "{var}");
        assert_eq!(ancestral_sample(&g, 50, 4).unwrap(), ancestral_sample(&g, 50, 4).unwrap());
    }

    #[test]
    fn closed_form_values() {
        let g = chain();
        assert!((exact_joint_logp(&g, &[0.0, 0.0]).unwrap() + 1.837_877_066).abs() < 1e-8);
        // log N(0; 0, 5)
        let expect = -math::HALF_LN_2PI - 0.5 * math::ln(5.0);
        assert!((exact_marginal_logp(&g, &[0.0]).unwrap() - expect).abs() < 1e-12);
        assert!((expect + 1.723_657_489).abs() < 1e-8);
        let joint = JointGaussian::of(&g).unwrap();
        assert_eq!(joint.cov, Tensor::from_rows(&[&[1.0, 2.0], &[2.0, 5.0]]));
    }

    #[test]
    fn projection_and_split() {
        let g = chain();
        let d = project_observed(&ancestral_sample(&g, 30, 1).unwrap(), &g, 1);
        assert_eq!((d.width(), d.len()), (1, 30));
        assert_eq!(d.columns, ["x"]);
        let (tr, te) = split(&d, 20, 10, 5).unwrap();
        assert_eq!((tr.len(), te.len()), (20, 10));
        let mut all: Vec<u64> = tr.rows.data().iter().chain(te.rows.data()).map(|v| v.to_bits()).collect();
        let mut orig: Vec<u64> = d.rows.data().iter().map(|v| v.to_bits()).collect();
        all.sort_unstable();
        orig.sort_unstable();
        assert_eq!(all, orig);
        assert_eq!(split(&d, 25, 10, 5), Err(DataError::InsufficientRows { requested: 35, available: 30 }));
    }

    #[test]
    fn missing_cpds() {
        let g = chain().without_cpds();
        assert_eq!(ancestral_sample(&g, 1, 0), Err(DataError::MissingCpd("chain".into())));
    }
}
