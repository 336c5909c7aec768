//! Deterministic seed derivation.
//!
//! Every stochastic component of a run draws its seed as
//! `derive_seed(master, index, purpose)` where `index` is a counter
//! (replication number, restart number, Newton iteration) and `purpose` a
//! fixed per-component tag. The scheme is a splitmix64 finalizer over a fixed
//! linear combination, so seeds are stable under adding replications and do
//! not depend on scheduling order.

/// Component tags. Fixed constants: changing them changes every derived seed.
pub mod purpose {
    pub const SAMPLE_NETWORK: u64 = 1;
    pub const PERTURB_INIT: u64 = 2;
    pub const VRBEA: u64 = 3;
    pub const MZ_MULTISTART: u64 = 4;
    pub const MCMC_CHAIN: u64 = 5;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64, purpose: u64) -> u64 {
    let mixed = master
        ^ index.wrapping_mul(0xA076_1D64_78BD_642F)
        ^ purpose.wrapping_mul(0xE703_7ED1_A0B4_28DB);
    splitmix64(splitmix64(mixed))
}
