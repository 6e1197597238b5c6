//! Deterministic seed derivation. Every random decision in a run pulls its
//! RNG from the run seed plus a domain tag, so call order and scheduling can
//! never change results.

/// splitmix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes an ordered list of words into one derived seed.
pub fn mix(parts: &[u64]) -> u64 {
    let mut state = 0x1CE5_EA2C_0FFE_E000u64;
    for &p in parts {
        state = splitmix64(state ^ p);
    }
    state
}

/// Domain tags keeping independent random streams apart.
pub mod domain {
    pub const SMOTE: u64 = 1;
    pub const BASELINE: u64 = 2;
    pub const ZERO_SHOT: u64 = 3;
    pub const ROLE: u64 = 4;
    pub const FINAL_SELECT: u64 = 5;
    pub const TEST_SPLIT: u64 = 6;
    pub const RETRY: u64 = 7;
}
