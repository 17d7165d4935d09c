//! Stable seed derivation. Results must not depend on the platform or on
//! `std`'s randomized hashers, so these are fixed FNV-1a / SplitMix64 mixes.

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Combine a base seed with a counter into an independent-looking stream seed.
pub(crate) fn mix(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

/// Combine a base seed with a sequence of labels.
pub(crate) fn mix_labels(seed: u64, labels: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for label in labels {
        for b in label.bytes().chain(std::iter::once(0xff)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    mix(seed, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_separated() {
        assert_ne!(mix_labels(1, &["ab", "c"]), mix_labels(1, &["a", "bc"]));
        assert_eq!(mix_labels(9, &["x"]), mix_labels(9, &["x"]));
        assert_ne!(mix(0, 1), mix(0, 2));
    }
}
