//! Seed derivation and the few samplers whose exact algorithm is part of the
//! reproducibility contract.
//!
//! Every random decision in a run draws from its own ChaCha8 stream, keyed by
//! `(seed, purpose, a, b)`. Peer training streams use `(peer, round)` so the
//! outcome does not depend on which worker runs which peer.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Purposes of the independent streams drawn from one experiment seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Partition = 1,
    Attackers = 2,
    Init = 3,
    Selection = 4,
    PeerTraining = 5,
    Defense = 6,
    Synth = 7,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a stream tag and two indices into a new 64-bit seed.
pub fn derive_seed(seed: u64, stream: Stream, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ stream as u64);
    h = splitmix64(h ^ a);
    splitmix64(h ^ b.rotate_left(32))
}

pub fn stream(seed: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, a, b))
}

/// Standard normal draw by the Box–Muller transform (cosine branch only).
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // u1 in (0, 1] keeps the log finite.
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Gamma(shape, 1) by Marsaglia and Tsang (2000).
///
/// For `shape < 1` the boost `Gamma(shape) = Gamma(shape + 1) * U^(1/shape)`
/// is applied. Normals come from [`standard_normal`], uniforms from `gen::<f64>`.
pub fn gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    assert!(shape > 0.0, "gamma shape must be positive");
    if shape < 1.0 {
        let u = 1.0 - rng.gen::<f64>();
        return gamma(rng, shape + 1.0) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let (x, v) = loop {
            let x = standard_normal(rng);
            let v = 1.0 + c * x;
            if v > 0.0 {
                break (x, v * v * v);
            }
        };
        let u = rng.gen::<f64>();
        if u < 1.0 - 0.0331 * x.powi(4) {
            return d * v;
        }
        if u > 0.0 && u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Symmetric Dirichlet(alpha, ..., alpha) sample of length `k`.
pub fn dirichlet<R: Rng + ?Sized>(rng: &mut R, alpha: f64, k: usize) -> Vec<f64> {
    let mut draws: Vec<f64> = (0..k).map(|_| gamma(rng, alpha)).collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.iter_mut().for_each(|g| *g /= total);
    } else {
        // Every gamma underflowed (tiny alpha); fall back to a point mass.
        let hot = rng.gen_range(0..k);
        draws.iter_mut().enumerate().for_each(|(i, g)| *g = if i == hot { 1.0 } else { 0.0 });
    }
    draws
}
