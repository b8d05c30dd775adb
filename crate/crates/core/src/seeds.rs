//! Seed derivation for independent RNG streams.

/// Seed for stream `index` under `master`; a splitmix64 step over the pair, so
/// neighbouring indices give unrelated streams.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D4_9BB1_3311_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_distinct() {
        let seeds: std::collections::BTreeSet<u64> =
            (0..1000).flat_map(|m| (0..20).map(move |i| derive_seed(m, i))).collect();
        assert_eq!(seeds.len(), 20_000);
    }
}
