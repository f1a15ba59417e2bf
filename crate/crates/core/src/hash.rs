//! Stable 64-bit hashing used for cache keys and seed derivation.
//!
//! FNV-1a is fixed across platforms and releases, unlike `core::hash::SipHasher`
//! defaults, so keys written to disk stay valid.

use core::hash::Hasher;

use fnv::FnvHasher;

/// FNV-1a over the given byte slices. Each part is length-prefixed so that
/// `["ab", "c"]` and `["a", "bc"]` hash differently.
pub fn hash_parts(parts: &[&[u8]]) -> u64 {
    let mut hasher = FnvHasher::default();
    for part in parts {
        hasher.write(&(part.len() as u64).to_le_bytes());
        hasher.write(part);
    }
    mix(hasher.finish())
}

pub fn hash_str(text: &str) -> u64 {
    hash_parts(&[text.as_bytes()])
}

/// Derives an independent seed for a named component from a master seed.
pub fn derive_seed(master: u64, component: &str) -> u64 {
    hash_parts(&[&master.to_le_bytes(), component.as_bytes()])
}

// splitmix64 finalizer; FNV alone has weak low bits for short inputs.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
