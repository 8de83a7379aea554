//! Spectral normalization of masked weight matrices.

use crate::diff::Tensor;
use crate::linalg::spectral_norm;

/// `(w ⊙ m) · min(1, c / σ(w ⊙ m))`.
pub fn spectral_normalize(w: &Tensor, m: &Tensor, c: f64) -> Tensor {
    let masked = w.hadamard(m);
    let sigma = spectral_norm(&masked);
    if sigma > c {
        masked.scale(c / sigma)
    } else {
        masked
    }
}
