//! Stable derivation of child seeds from a master seed.

/// Seed for stream `index` under `master`: two rounds of the splitmix64
/// finalizer over the pair, so neighbouring indices give unrelated streams.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(master) ^ index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_and_distinct() {
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
        assert_ne!(derive_seed(7, 3), derive_seed(7, 4));
        assert_ne!(derive_seed(7, 3), derive_seed(8, 3));
        // pinned so runs stay reproducible across releases
        assert_eq!(derive_seed(0, 0), 12035550249420947055);
        assert_eq!(derive_seed(42, 7), 1587005860896957696);
    }
}
