//! Counter-based random streams. Every stream is keyed by `(seed, stream, step)`
//! so that draws never depend on the order in which work items are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::potentials::{Potential, Vec2};

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for `(seed, stream, step)`.
pub fn stream(seed: u64, stream: u64, step: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix64(seed) ^ splitmix64(stream.rotate_left(21)) ^ step.rotate_left(42);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

pub fn standard_normal2<R: rand::Rng + ?Sized>(rng: &mut R) -> Vec2 {
    Vec2::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// `n` independent standard-normal configuration vectors scaled by `scale`.
/// Under FENE, draws outside `|q|^2 < b(1 - margin)` are rejected and redrawn.
pub fn sample_initial_ensemble<R: rand::Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    scale: f64,
    potential: &Potential,
    margin: f64,
) -> Result<Vec<Vec2>> {
    const MAX_REDRAWS: usize = 10_000;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut redraws = 0;
        loop {
            let q = standard_normal2(rng) * scale;
            if potential.is_feasible(&q, margin) {
                out.push(q);
                break;
            }
            redraws += 1;
            if redraws > MAX_REDRAWS {
                return Err(Error::RejectionOverflow(MAX_REDRAWS));
            }
        }
    }
    Ok(out)
}
