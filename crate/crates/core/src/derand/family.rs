//! Set sizes and subset families for the registered martingales.

use crate::online::Params;
use crate::rng::{keyed_rng, tag};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SizeOverrides {
    pub q_colors: Option<usize>,
    pub fbn_u: Option<usize>,
    pub fbn_m: Option<usize>,
    pub bvp_colors: Option<usize>,
    pub bvp_u: Option<usize>,
    pub bvp_m: Option<usize>,
}

/// Integral set sizes used by the three potential families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sizes {
    /// |C| for the few-bad-colors potentials, from ε⁵Δ.
    pub q_colors: usize,
    /// |U| for the few-bad-neighbors potentials, from αΔ.
    pub fbn_u: usize,
    /// |M| for the few-bad-neighbors potentials, from εαΔ.
    pub fbn_m: usize,
    /// |C| for the bad-vertex potentials, from 2c_KεΔ capped at Δ.
    pub bvp_colors: usize,
    /// |U| for the bad-vertex potentials, from εΔ.
    pub bvp_u: usize,
    /// |M| for the bad-vertex potentials, from ε³Δ.
    pub bvp_m: usize,
}

fn floor1(x: f64) -> usize {
    (x.floor() as usize).max(1)
}

impl Sizes {
    pub fn resolve(p: &Params, ov: &SizeOverrides) -> Sizes {
        let d = p.delta as f64;
        let e = p.eps;
        Sizes {
            q_colors: ov.q_colors.unwrap_or(floor1(e.powi(5) * d)).min(p.delta),
            fbn_u: ov.fbn_u.unwrap_or(floor1(p.alpha * d)),
            fbn_m: ov.fbn_m.unwrap_or(floor1(e * p.alpha * d)),
            bvp_colors: ov.bvp_colors.unwrap_or(floor1(2.0 * p.c_k * e * d)).min(p.delta),
            bvp_u: ov.bvp_u.unwrap_or(floor1(e * d)),
            bvp_m: ov.bvp_m.unwrap_or(floor1(e.powi(3) * d)),
        }
    }
}

/// Which subsets are registered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FamilyMode {
    /// Every subset; refused beyond `budget` registered martingales.
    Exact { budget: u64 },
    /// Every subset where there are at most `k`, else `k` seeded random ones.
    Restricted { k: usize, seed: u64 },
    /// Exact when within `budget`, restricted otherwise.
    Auto { budget: u64, k: usize, seed: u64 },
}

/// Lexicographic r-subsets of `0..n` as index vectors.
pub struct Combinations {
    n: usize,
    idx: Vec<usize>,
    done: bool,
}

pub fn combinations(n: usize, r: usize) -> Combinations {
    Combinations {
        n,
        idx: (0..r).collect(),
        done: r > n,
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;
    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.idx.clone();
        let r = self.idx.len();
        let mut i = r;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.idx[i] < self.n - r + i {
                self.idx[i] += 1;
                for j in i + 1..r {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

pub fn binomial(n: usize, r: usize) -> u128 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Subsets of `items` of size `r` under the restricted rule: all of them
/// when there are at most `k`, otherwise `k` distinct seeded random ones.
pub fn restricted_subsets<T: Copy + Ord>(items: &[T], r: usize, k: usize, key: &[u64]) -> Vec<Vec<T>> {
    let total = binomial(items.len(), r);
    if total == 0 {
        return Vec::new();
    }
    if total <= k as u128 {
        return combinations(items.len(), r)
            .map(|ix| ix.into_iter().map(|i| items[i]).collect())
            .collect();
    }
    let mut parts = vec![tag::FAMILY];
    parts.extend_from_slice(key);
    let mut rng = keyed_rng(&parts);
    let mut out: Vec<Vec<T>> = Vec::with_capacity(k);
    while out.len() < k {
        let mut ix = rand::seq::index::sample(&mut rng, items.len(), r).into_vec();
        ix.sort_unstable();
        let s: Vec<T> = ix.into_iter().map(|i| items[i]).collect();
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out.sort();
    out
}
