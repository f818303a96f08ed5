//! Stable hashing for seed derivation and feature hashing.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    fnv1a_extend(FNV_OFFSET, bytes)
}

fn fnv1a_extend(mut h: u64, bytes: &[u8]) -> u64 {
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Per-task seed, independent of scheduling order.
pub fn task_seed(rng_seed: u64, task_id: &str) -> u64 {
    let h = fnv1a_extend(FNV_OFFSET, &rng_seed.to_le_bytes());
    finalize(fnv1a_extend(h, task_id.as_bytes()))
}

/// Mixes further integer coordinates (round, sentence, ...) into a seed.
pub fn mix(seed: u64, parts: &[u64]) -> u64 {
    let mut h = fnv1a_extend(FNV_OFFSET, &seed.to_le_bytes());
    for p in parts {
        h = fnv1a_extend(h, &p.to_le_bytes());
    }
    finalize(h)
}

// splitmix64 finalizer
fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
