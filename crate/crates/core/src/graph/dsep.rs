//! d-separation by Bayes-ball reachability.

use alloc::collections::VecDeque;
use alloc::string::ToString;
use alloc::vec;

use super::{BayesNet, GraphError};

/// Whether `a` and `b` are d-separated given `conditioning`, by node id.
pub fn d_separated(g: &BayesNet, a: &str, b: &str, conditioning: &[&str]) -> Result<bool, GraphError> {
    let lookup = |id: &str| g.index_of(id).ok_or_else(|| GraphError::UnknownNode(id.to_string()));
    let (a, b) = (lookup(a)?, lookup(b)?);
    let z = conditioning.iter().map(|id| lookup(id)).collect::<Result<alloc::vec::Vec<_>, _>>()?;
    Ok(d_separated_by_index(g, a, b, &z))
}

/// Index form of [`d_separated`]. A node inside the conditioning set is
/// separated from everything.
pub fn d_separated_by_index(g: &BayesNet, a: usize, b: usize, conditioning: &[usize]) -> bool {
    let n = g.len();
    let mut observed = vec![false; n];
    for &z in conditioning {
        observed[z] = true;
    }
    if observed[a] || observed[b] {
        return true;
    }
    if a == b {
        return false;
    }

    // Ancestors of the conditioning set, inclusive.
    let mut ancestral = vec![false; n];
    let mut stack: alloc::vec::Vec<usize> = conditioning.to_vec();
    while let Some(v) = stack.pop() {
        if ancestral[v] {
            continue;
        }
        ancestral[v] = true;
        stack.extend_from_slice(g.parents(v));
    }

    // (node, arrived_from_child)
    let mut visited = vec![[false; 2]; n];
    let mut queue = VecDeque::new();
    queue.push_back((a, true));
    while let Some((v, up)) = queue.pop_front() {
        let slot = usize::from(up);
        if visited[v][slot] {
            continue;
        }
        visited[v][slot] = true;
        if v == b {
            return false;
        }
        if up {
            if !observed[v] {
                queue.extend(g.parents(v).iter().map(|&p| (p, true)));
                queue.extend(g.children(v).iter().map(|&c| (c, false)));
            }
        } else {
            if !observed[v] {
                queue.extend(g.children(v).iter().map(|&c| (c, false)));
            }
            if ancestral[v] {
                queue.extend(g.parents(v).iter().map(|&p| (p, true)));
            }
        }
    }
    true
}
