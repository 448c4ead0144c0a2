//! The fixed instance suite shared by the acceptance checks.

use edgecolor_core::derand::{DerandConfig, FamilyMode};
use edgecolor_core::graph::{generate, Graph, InstanceKind};
use edgecolor_core::slocal::OrderKind;

pub const EPS: f64 = 0.3;

pub struct Instance {
    pub label: String,
    pub kind: InstanceKind,
    pub seed: u64,
    pub g: Graph,
    pub order: OrderKind,
}

impl Instance {
    pub fn new(kind: InstanceKind, seed: u64) -> Instance {
        let g = generate(&kind, seed).unwrap_or_else(|e| panic!("generating {kind:?}: {e}"));
        let order = match kind {
            InstanceKind::StarLb { .. } => OrderKind::Adversarial,
            InstanceKind::RandomMaxDeg { .. } => OrderKind::Random { seed: seed ^ 0x5eed },
            _ => OrderKind::Id,
        };
        let label = format!("{kind:?}#{seed}");
        Instance { label, kind, seed, g, order }
    }

    pub fn delta(&self) -> usize {
        self.g.max_degree()
    }
}

/// (n, seed) pairs for the random family at a given Δ. High Δ stays small
/// because the deterministic chooser costs milliseconds per edge there.
fn random_sizes(delta: usize) -> Vec<(usize, u64)> {
    let ns: Vec<usize> = match delta {
        3 => vec![4, 8, 20, 60, 200, 1000, 5000],
        4 => vec![5, 9, 20, 60, 200, 1000],
        5 => vec![6, 10, 24, 60, 200, 600],
        6 => vec![7, 12, 24, 48, 100, 200],
        7..=9 => vec![delta + 1, delta + 3, 2 * delta, 4 * delta, 8 * delta, 12 * delta],
        _ => vec![delta + 1, delta + 2, delta + 4, 2 * delta, 3 * delta, 4 * delta],
    };
    let mut out = Vec::new();
    for seed in 0u64.. {
        for &n in &ns {
            if out.len() == 12 {
                return out;
            }
            out.push((n, seed * 1000 + n as u64));
        }
    }
    unreachable!()
}

/// At least 200 seeded instances: paths, cycles, stars, star_lb and random
/// graphs with Δ from 3 to 16, n ≤ 5000.
pub fn suite() -> Vec<Instance> {
    let mut out = Vec::new();
    for n in [2, 3, 4, 7, 16, 100, 1000, 5000] {
        out.push(Instance::new(InstanceKind::Path { n }, 0));
    }
    for n in [3, 4, 5, 8, 17, 100, 1000, 5000] {
        out.push(Instance::new(InstanceKind::Cycle { n }, 0));
    }
    for b in [1, 2, 3, 4, 6, 8, 12, 16] {
        out.push(Instance::new(InstanceKind::CompleteBipartite { a: 1, b }, 0));
    }
    for delta in 2..=6 {
        for reps in [1, 3] {
            out.push(Instance::new(InstanceKind::StarLb { delta, reps }, 0));
        }
    }
    for delta in 3..=16 {
        for (n, seed) in random_sizes(delta) {
            out.push(Instance::new(InstanceKind::RandomMaxDeg { n, delta }, seed));
        }
    }
    out
}

/// Exact enumeration while it fits the budget, seeded subfamilies beyond.
pub fn suite_derand() -> DerandConfig {
    DerandConfig { mode: FamilyMode::Auto { budget: 200_000, k: 8, seed: 11 }, ..DerandConfig::default() }
}

pub fn exact_derand() -> DerandConfig {
    DerandConfig { mode: FamilyMode::Exact { budget: 50_000_000 }, ..DerandConfig::default() }
}
