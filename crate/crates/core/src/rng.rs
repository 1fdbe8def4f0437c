//! Named random streams.
//!
//! Every consumer of randomness asks for a stream by purpose string. The
//! master seed keys a ChaCha8 generator and the purpose selects its stream
//! id, so adding a new consumer never shifts the numbers another one sees.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 64-bit FNV-1a of `purpose`.
pub fn purpose_id(purpose: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    purpose
        .bytes()
        .fold(OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

pub fn stream(seed: u64, purpose: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose_id(purpose));
    rng
}

/// A child seed for a sub-computation that takes its own `seed` argument.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    stream(seed, purpose).next_u64()
}

/// Uniform on `(0, 1]`, safe to pass to `ln`.
#[inline]
pub(crate) fn open_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_independent_of_each_other() {
        let a1 = stream(7, "shuffle").next_u64();
        let a2 = stream(7, "shuffle").next_u64();
        let b = stream(7, "init").next_u64();
        let c = stream(8, "shuffle").next_u64();
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
        assert_ne!(a1, c);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(purpose_id(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(purpose_id("a"), 0xaf63_dc4c_8601_ec8c);
    }
}
