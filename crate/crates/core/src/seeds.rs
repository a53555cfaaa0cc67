//! Deterministic seed derivation for restarts and recursion branches.

/// SplitMix64 finalizer.
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for restart `r`; restart 0 reuses the base seed unchanged.
pub(crate) fn restart_seed(base: u64, r: usize) -> u64 {
    if r == 0 {
        base
    } else {
        mix(base ^ mix(r as u64))
    }
}

pub(crate) fn child_seed(parent: u64, child: usize) -> u64 {
    mix(parent.wrapping_add(0xA076_1D64_78BD_642F) ^ mix(child as u64 + 1))
}
