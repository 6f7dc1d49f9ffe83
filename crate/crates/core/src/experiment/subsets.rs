use std::collections::HashSet;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_K_VALUES: [usize; 11] = [1, 2, 3, 4, 5, 8, 10, 20, 50, 100, 200];

/// `max(5, ⌊D/k⌋)`.
pub fn subset_count(d: usize, k: usize) -> usize {
    (d / k).max(5)
}

/// Draws `max(5, ⌊D/k⌋)` subsets of `k` distinct fact indices. With enough
/// facts the subsets are disjoint slices of one shuffle; otherwise each is
/// drawn independently and exact repeats are redrawn.
pub fn make_subsets(d: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > d {
        return Err(Error::config(format!("k = {k} must lie in 1..={d}")));
    }
    let count = subset_count(d, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    if d / k >= 5 {
        let mut all: Vec<usize> = (0..d).collect();
        all.shuffle(&mut rng);
        return Ok(all.chunks_exact(k).take(count).map(<[usize]>::to_vec).collect());
    }
    // tiny datasets may not have `count` distinct subsets at all
    if !binomial_at_least(d, k, count) {
        return Err(Error::config(format!(
            "cannot draw {count} distinct subsets of size {k} from {d} facts"
        )));
    }
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut s = index::sample(&mut rng, d, k).into_vec();
        let mut key = s.clone();
        key.sort_unstable();
        if seen.insert(key) {
            s.sort_unstable();
            out.push(s);
        }
    }
    Ok(out)
}

/// Whether C(n, k) >= target, without overflow.
fn binomial_at_least(n: usize, k: usize, target: usize) -> bool {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c >= target as u128 {
            return true;
        }
    }
    c >= target as u128
}
