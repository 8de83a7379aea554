mod common;

use common::dag_spec;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use siren_core::flow::{Direction, Grf, ResidualBlock};
use siren_core::graph::{faithful_inverse, BayesNet};
use siren_core::masking::{decoder_flow_masks, encoder_flow_masks, MaskSet};
use siren_core::rng::{normal, normal_tensor, seeded};
use siren_core::Tensor;

fn scrambled_block<R: Rng>(masks: &MaskSet, cond_dim: usize, scale: f64, rng: &mut R) -> ResidualBlock {
    let mut b = ResidualBlock::zeros(masks.clone(), cond_dim, 0.97);
    for p in b.params_mut() {
        *p = Tensor::from_fn(p.rows(), p.cols(), |_, _| scale * normal(rng));
    }
    b.normalize();
    b
}

fn scrambled_flow<R: Rng>(masks: &MaskSet, cond_dim: usize, t: usize, scale: f64, rng: &mut R) -> Grf {
    let blocks = (0..t).map(|_| scrambled_block(masks, cond_dim, scale, rng)).collect();
    Grf::new(blocks, Direction::Normalizing).unwrap()
}

fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, at: &[f64], h: f64) -> DMatrix<f64> {
    let out = f(at).len();
    let mut j = DMatrix::zeros(out, at.len());
    let mut probe = at.to_vec();
    for c in 0..at.len() {
        probe[c] = at[c] + h;
        let up = f(&probe);
        probe[c] = at[c] - h;
        let down = f(&probe);
        probe[c] = at[c];
        for r in 0..out {
            j[(r, c)] = (up[r] - down[r]) / (2.0 * h);
        }
    }
    j
}

fn sigma_max(t: &Tensor) -> f64 {
    let m = DMatrix::from_row_slice(t.rows(), t.cols(), t.data());
    m.singular_values().max()
}

fn prior_masks(spec: &common::DagSpec, m: usize) -> (BayesNet, MaskSet) {
    let g = spec.build(false);
    let masks = decoder_flow_masks(&g, m).unwrap();
    (g, masks)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn logdet_matches_determinant(spec in dag_spec(7), t in 1usize..=4, m in 1usize..=3, seed in any::<u64>()) {
        let (_, masks) = prior_masks(&spec, m);
        let mut rng = seeded(seed);
        let flow = scrambled_flow(&masks, 0, t, 1.5, &mut rng);
        let z = normal_tensor(&mut rng, 1, flow.dim());
        let (_, logdet) = flow.forward_logdet(&z, None).unwrap();
        let jac = fd_jacobian(|v| flow.forward(&Tensor::row(v), None).unwrap().into_vec(), z.data(), 1e-5);
        let brute = jac.determinant().abs().ln();
        prop_assert!((logdet[0] - brute).abs() < 1e-6, "{} vs {}", logdet[0], brute);
    }

    #[test]
    fn conditioned_logdet_matches_determinant(spec in dag_spec(7), seed in any::<u64>()) {
        let g = spec.build(false);
        prop_assume!(g.observed_count() > 0);
        let inv = faithful_inverse(&g).unwrap();
        let masks = encoder_flow_masks(&inv, 2).unwrap();
        let d = g.observed_count();
        let mut rng = seeded(seed);
        let flow = scrambled_flow(&masks, d, 3, 1.5, &mut rng);
        let z = normal_tensor(&mut rng, 1, flow.dim());
        let x = normal_tensor(&mut rng, 1, d);
        let (_, logdet) = flow.forward_logdet(&z, Some(&x)).unwrap();
        let jac = fd_jacobian(|v| flow.forward(&Tensor::row(v), Some(&x)).unwrap().into_vec(), z.data(), 1e-5);
        prop_assert!((logdet[0] - jac.determinant().abs().ln()).abs() < 1e-6);
    }

    #[test]
    fn normalized_weights_respect_bound(spec in dag_spec(8), m in 1usize..=4, scale in 0.1f64..20.0, seed in any::<u64>()) {
        let (_, masks) = prior_masks(&spec, m);
        let b = scrambled_block(&masks, 0, scale, &mut seeded(seed));
        prop_assert!(sigma_max(&b.w1.hadamard(&masks.m1)) <= 0.97 + 1e-6);
        prop_assert!(sigma_max(&b.w2.hadamard(&masks.m2)) <= 0.97 + 1e-6);
    }

    #[test]
    fn block_jacobian_is_confined_to_pattern(spec in dag_spec(7), seed in any::<u64>()) {
        let g = spec.build(false);
        prop_assume!(g.observed_count() > 0);
        let inv = faithful_inverse(&g).unwrap();
        let masks = encoder_flow_masks(&inv, 2).unwrap();
        let (k, d) = (g.latent_count(), g.observed_count());
        let mut rng = seeded(seed);
        let block = scrambled_block(&masks, d, 2.0, &mut rng);
        let input: Vec<f64> = (0..k + d).map(|_| normal(&mut rng)).collect();
        let f = |v: &[f64]| block.forward(&Tensor::row(&v[..k]), Some(&Tensor::row(&v[k..]))).unwrap().into_vec();
        let jac = fd_jacobian(f, &input, 1e-3);
        let allowed = masks.connectivity();
        for r in 0..k {
            for c in 0..k + d {
                let in_pattern = allowed.get(r, c) == 1.0 || r == c;
                if !in_pattern {
                    prop_assert_eq!(jac[(r, c)], 0.0);
                }
            }
        }
    }

    #[test]
    fn round_trips_recover_inputs(spec in dag_spec(8), seed in any::<u64>()) {
        let (_, masks) = prior_masks(&spec, 3);
        let mut rng = seeded(seed);
        let flow = scrambled_flow(&masks, 0, 4, 3.0, &mut rng);
        let z = normal_tensor(&mut rng, 8, flow.dim()).scale(2.0);
        let y = flow.forward(&z, None).unwrap();
        let back = flow.invert(&y, None, 1e-10, 100).unwrap();
        prop_assert!(back.sub(&z).max_abs() < 1e-8);
    }
}

#[test]
fn identity_flow_has_zero_logdet() {
    let g = BayesNet::builder("c").latent("a").latent("b").edge("a", "b").build().unwrap();
    let masks = decoder_flow_masks(&g, 2).unwrap();
    let flow = Grf::identity(&masks, 0, 3, 0.97, Direction::Normalizing).unwrap();
    let z = normal_tensor(&mut seeded(1), 5, 2);
    let (out, logdet) = flow.forward_logdet(&z, None).unwrap();
    assert_eq!(out, z);
    assert!(logdet.iter().all(|&l| l == 0.0));
}

#[test]
fn shape_mismatch_is_reported() {
    let g = BayesNet::builder("c").latent("a").latent("b").build().unwrap();
    let masks = decoder_flow_masks(&g, 1).unwrap();
    let flow = Grf::identity(&masks, 0, 1, 0.97, Direction::Normalizing).unwrap();
    assert!(flow.forward(&Tensor::zeros(1, 3), None).is_err());
    assert!(flow.forward(&Tensor::zeros(1, 2), Some(&Tensor::zeros(1, 1))).is_err());
}
