//! Binary masks that give masked networks their graphical sparsity.
//!
//! Each hidden unit is labelled with one output node. Unit `h` with label
//! `j` reads only the inputs belonging to `j` itself (when `j` is also an
//! input) and to `j`'s parents, and output `j` reads only its own units.
//! The composite pattern `m2 · m1` therefore never connects an output to an
//! input outside `{j} ∪ parents(j)`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::diff::Tensor;
use crate::graph::{BayesNet, InverseGraph, NodeKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MaskError {
    #[error("mask construction needs at least one latent node")]
    NoLatents,
    #[error("mask construction needs at least one observed node")]
    NoObserved,
    #[error("hidden units per node must be at least 1")]
    ZeroMultiplier,
    #[error("observed node `{0}` has no latent parents")]
    NoLatentParents(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    /// hidden x input
    pub m1: Tensor,
    /// output x hidden
    pub m2: Tensor,
    /// Output slot owning each hidden unit.
    pub hidden_labels: Vec<usize>,
    pub per_node_hidden: usize,
}

impl MaskSet {
    /// Builds masks from, for each output slot, the list of input slots it
    /// may read.
    fn from_allowed(allowed: &[Vec<usize>], input_dim: usize, m: usize) -> Self {
        let outputs = allowed.len();
        let hidden = outputs * m;
        let hidden_labels: Vec<usize> = (0..outputs).flat_map(|j| core::iter::repeat(j).take(m)).collect();
        let mut m1 = Tensor::zeros(hidden, input_dim);
        let mut m2 = Tensor::zeros(outputs, hidden);
        for (h, &j) in hidden_labels.iter().enumerate() {
            for &i in &allowed[j] {
                m1.set(h, i, 1.0);
            }
            m2.set(j, h, 1.0);
        }
        Self { m1, m2, hidden_labels, per_node_hidden: m }
    }

    /// All-ones masks of the given sizes (an unconstrained layer).
    pub fn dense(input_dim: usize, outputs: usize, m: usize) -> Self {
        let all: Vec<Vec<usize>> = (0..outputs).map(|_| (0..input_dim).collect()).collect();
        Self::from_allowed(&all, input_dim, m)
    }

    pub fn input_dim(&self) -> usize {
        self.m1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.m1.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.m2.rows()
    }

    /// Binary `output x input` pattern of `m2 · m1`.
    pub fn connectivity(&self) -> Tensor {
        self.m2.matmul(&self.m1).map(|v| if v > 0.0 { 1.0 } else { 0.0 })
    }
}

fn check_multiplier(m: usize) -> Result<(), MaskError> {
    if m == 0 {
        Err(MaskError::ZeroMultiplier)
    } else {
        Ok(())
    }
}

fn slot_of(nodes: &[usize], n: usize) -> Vec<Option<usize>> {
    let mut slots = alloc::vec![None; n];
    for (k, &v) in nodes.iter().enumerate() {
        slots[v] = Some(k);
    }
    slots
}

/// Masks for a prior-flow block over the latents of `g`. Only latent
/// parents are used; inputs and outputs are latent slots.
pub fn decoder_flow_masks(g: &BayesNet, m: usize) -> Result<MaskSet, MaskError> {
    check_multiplier(m)?;
    let latents = g.latents();
    if latents.is_empty() {
        return Err(MaskError::NoLatents);
    }
    let slots = slot_of(&latents, g.len());
    let allowed: Vec<Vec<usize>> = latents
        .iter()
        .enumerate()
        .map(|(j, &z)| {
            let mut a: Vec<usize> = g.parents(z).iter().filter_map(|&p| slots[p]).collect();
            a.push(j);
            a.sort_unstable();
            a
        })
        .collect();
    Ok(MaskSet::from_allowed(&allowed, latents.len(), m))
}

/// Masks for an encoder-flow block. Inputs are `z ⊕ x` (K latent slots
/// followed by D observed slots); outputs are the K latent slots.
pub fn encoder_flow_masks(inv: &InverseGraph, m: usize) -> Result<MaskSet, MaskError> {
    check_multiplier(m)?;
    let latents = inv.latents();
    if latents.is_empty() {
        return Err(MaskError::NoLatents);
    }
    let k = latents.len();
    let mut slots = slot_of(latents, inv.node_count());
    for (d, &x) in inv.observed().iter().enumerate() {
        slots[x] = Some(k + d);
    }
    let allowed: Vec<Vec<usize>> = latents
        .iter()
        .enumerate()
        .map(|(j, &z)| {
            let mut a: Vec<usize> = inv.parents(z).iter().filter_map(|&p| slots[p]).collect();
            a.push(j);
            a.sort_unstable();
            a
        })
        .collect();
    Ok(MaskSet::from_allowed(&allowed, k + inv.observed().len(), m))
}

/// Masks for the decoder network: latent inputs, one output slot per
/// observed node, shared by the mean and log-scale heads.
pub fn decoder_nn_masks(g: &BayesNet, m: usize) -> Result<MaskSet, MaskError> {
    check_multiplier(m)?;
    let latents = g.latents();
    let observed = g.observed();
    if latents.is_empty() {
        return Err(MaskError::NoLatents);
    }
    if observed.is_empty() {
        return Err(MaskError::NoObserved);
    }
    let slots = slot_of(&latents, g.len());
    let mut allowed = Vec::with_capacity(observed.len());
    for &x in &observed {
        let a: Vec<usize> =
            g.parents(x).iter().filter(|&&p| g.kind(p) == NodeKind::Latent).filter_map(|&p| slots[p]).collect();
        if a.is_empty() {
            return Err(MaskError::NoLatentParents(g.id(x).to_string()));
        }
        allowed.push(a);
    }
    Ok(MaskSet::from_allowed(&allowed, latents.len(), m))
}
