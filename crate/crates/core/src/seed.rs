//! Stable per-image seed derivation and rng stream construction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 increment; makes `image_seed` a splittable counter construction.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the per-image seed from the corpus seed: every image is
/// reproducible in isolation without replaying the planner.
pub fn image_seed(global_seed: u64, image_id: u64) -> u64 {
    mix64(global_seed.wrapping_add(image_id.wrapping_mul(GOLDEN_GAMMA)))
}

/// The rng stream consumed while planning an image's parameters.
pub fn plan_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// The rng stream consumed while applying a distortion to an image's pixels.
/// Distinct from the plan stream so the two draw sequences never overlap.
pub fn apply_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn image_seed_is_stable() {
        // Frozen values: any change here breaks manifest reproducibility.
        assert_eq!(image_seed(0, 0), mix64(0));
        assert_eq!(image_seed(42, 7), image_seed(42, 7));
        assert_ne!(image_seed(42, 7), image_seed(42, 8));
        assert_ne!(image_seed(42, 7), image_seed(43, 7));
    }

    #[test]
    fn mix64_scrambles_small_inputs() {
        let outputs: Vec<u64> = (0..16).map(mix64).collect();
        let mut sorted = outputs.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 16);
    }

    #[test]
    fn plan_and_apply_streams_differ() {
        let mut a = plan_rng(99);
        let mut b = apply_rng(99);
        let xs: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
        // Re-seeding reproduces each stream exactly.
        let mut a2 = plan_rng(99);
        let xs2: Vec<u64> = (0..4).map(|_| a2.next_u64()).collect();
        assert_eq!(xs, xs2);
    }
}
