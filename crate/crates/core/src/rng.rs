//! Seeded random number generation. Every stochastic routine in the crate
//! draws from a ChaCha8 stream derived from a 64-bit seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn seeded_stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for parameter initialization, disjoint from the per-epoch
/// streams `seeded_stream(seed, epoch)` used during training.
pub fn init_rng(seed: u64) -> SeededRng {
    seeded_stream(seed, u64::MAX)
}

/// Mixes `offset` into `root` (splitmix64 finalizer) to derive child seeds.
pub fn derive_seed(root: u64, offset: u64) -> u64 {
    let mut z = root.wrapping_add(offset.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

/// `rows x cols` tensor of standard normal draws, row-major.
pub fn normal_tensor<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> crate::Tensor {
    crate::Tensor::from_fn(rows, cols, |_, _| normal(rng))
}
