//! Seed derivation for reproducible, splittable random streams.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded from a 64-bit value.
//! Child seeds are derived with SplitMix64 finalization so that a realization's
//! streams depend only on `(base, stream, index)`:
//!
//! ```text
//! derive_seed(base, stream, index) = mix(mix(base ^ mix(stream)) ^ index)
//! mix(z) = splitmix64 finalizer of (z + 0x9E3779B97F4A7C15)
//! ```
//!
//! Adding realizations to a campaign therefore never perturbs earlier ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags.
pub mod stream {
    pub const PLACEMENT: u64 = 1;
    pub const REFLECTION: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const REALIZATION: u64 = 4;
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(stream)) ^ index)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Serde adapter for `u64` seeds: written as an integer when it fits an `i64`
/// (TOML's integer range), otherwise as a decimal string.
pub mod seed_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        if *seed <= i64::MAX as u64 {
            s.serialize_i64(*seed as i64)
        } else {
            s.serialize_str(&seed.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) if v >= 0 => Ok(v as u64),
            Repr::Int(v) => Err(serde::de::Error::custom(format!("negative seed {v}"))),
            Repr::Str(s) => s.trim().parse().map_err(serde::de::Error::custom),
        }
    }
}
