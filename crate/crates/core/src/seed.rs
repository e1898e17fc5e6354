/// SplitMix64 finalizer; derives independent stream seeds from a base seed
/// and a tuple of integers so parallel work stays reproducible.
pub(crate) fn derive(base: u64, parts: &[u64]) -> u64 {
    let mut z = base ^ 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        z = mix(z.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15));
    }
    z
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
