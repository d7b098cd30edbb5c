use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `parent` for stream `index`.
///
/// SplitMix64 finalizer over `parent + (index + 1) * gamma`. The finalizer is a
/// bijection, so children of one parent are pairwise distinct.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    mix64(parent.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Seed derived from a string key, e.g. a dataset name.
pub(crate) fn seed_from_str(parent: u64, key: &str) -> u64 {
    key.bytes().fold(derive_seed(parent, u64::MAX), |acc, b| {
        derive_seed(acc, b as u64)
    })
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Maps `f` over `0..n`, in parallel when the `parallel` feature is on.
/// Output order is always index order.
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
