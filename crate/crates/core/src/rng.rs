//! Named, indexed random substreams derived from one run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Rng = ChaCha8Rng;

fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Stream `index` of the substream family `domain` under `seed`.
///
/// Streams never overlap: ChaCha's 64-bit stream id carries the
/// `(domain, index)` pair and the key carries the seed.
pub fn substream(seed: u64, domain: &str, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(domain).wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
    rng
}

/// A child seed, for handing to APIs that take a plain `u64`.
pub fn derive_seed(seed: u64, domain: &str, index: u64) -> u64 {
    use rand::RngCore;
    substream(seed, domain, index).next_u64()
}

pub fn fill_normal(rng: &mut Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
}

pub fn normal_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    fill_normal(rng, &mut v);
    v
}
