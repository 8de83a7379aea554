//! Small dense symmetric helpers: Cholesky for the closed-form Gaussian
//! oracles and Jacobi eigenvalues for spectral norms.

use alloc::vec::Vec;

use crate::diff::Tensor;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("matrix must be square, got {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
}

/// Lower-triangular Cholesky factor `L` with `a = L Lᵀ`.
pub fn cholesky(a: &Tensor) -> Result<Tensor, LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::NotSquare(a.rows(), a.cols()));
    }
    let mut l = Tensor::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) {
            return Err(LinalgError::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = math::sqrt(d);
        l.set(j, j, d);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / d);
        }
    }
    Ok(l)
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn solve_lower(l: &Tensor, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = alloc::vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    y
}

/// `log det a` from its Cholesky factor.
pub fn logdet_from_cholesky(l: &Tensor) -> f64 {
    (0..l.rows()).map(|i| 2.0 * math::ln(l.get(i, i))).sum()
}

/// Log-density of a multivariate normal `N(mean, cov)` at `x`.
pub fn mvn_logpdf(x: &[f64], mean: &[f64], cov: &Tensor) -> Result<f64, LinalgError> {
    let l = cholesky(cov)?;
    let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let y = solve_lower(&l, &diff);
    let quad: f64 = y.iter().map(|v| v * v).sum();
    Ok(-(x.len() as f64) * math::HALF_LN_2PI - 0.5 * logdet_from_cholesky(&l) - 0.5 * quad)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, in
/// diagonal order of the converged matrix.
pub fn symmetric_eigenvalues(a: &Tensor) -> Result<Vec<f64>, LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::NotSquare(n, a.cols()));
    }
    let mut m = a.clone();
    let total: f64 = m.data().iter().map(|v| v * v).sum();
    for _ in 0..64 {
        let off: f64 = (0..n).flat_map(|p| (p + 1..n).map(move |q| (p, q))).map(|(p, q)| m.get(p, q) * m.get(p, q)).sum();
        if off <= 1e-32 * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let t = 1.0 / (theta.abs() + math::sqrt(theta * theta + 1.0));
                    if theta < 0.0 { -t } else { t }
                };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let (kp, kq) = (m.get(k, p), m.get(k, q));
                    m.set(k, p, c * kp - s * kq);
                    m.set(k, q, s * kp + c * kq);
                }
                for k in 0..n {
                    let (pk, qk) = (m.get(p, k), m.get(q, k));
                    m.set(p, k, c * pk - s * qk);
                    m.set(q, k, s * pk + c * qk);
                }
            }
        }
    }
    Ok((0..n).map(|i| m.get(i, i)).collect())
}

/// Largest singular value, from the eigenvalues of the smaller Gram matrix.
pub fn spectral_norm(w: &Tensor) -> f64 {
    if w.is_empty() {
        return 0.0;
    }
    let gram = if w.rows() >= w.cols() { w.t_matmul(w) } else { w.matmul_t(w) };
    let top = symmetric_eigenvalues(&gram).expect("gram matrix is square").into_iter().fold(0.0, f64::max);
    math::sqrt(top)
}
