//! Pessimistic-estimator potentials and the deterministic color chooser.

mod chooser;
mod family;
mod invariants;
mod potentials;

pub use chooser::{ArgminChooser, Choice, TraceRow, TIE_TOLERANCE};
pub use family::{combinations, FamilyMode, SizeOverrides, Sizes};
pub use invariants::{check_invariants, InvariantReport};
pub use potentials::{register_potentials, Effect, Family, PotentialState, Term, TermKey};

use crate::numeric::Dd;
use serde::{Deserialize, Serialize};

/// Parameters of one exponential potential.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiParams {
    pub lambda: f64,
    pub s: f64,
    pub n: f64,
}

impl PhiParams {
    pub fn new(lambda: f64, s: f64, n: f64) -> PhiParams {
        debug_assert!(lambda > 0.0 && s > 0.0 && n > 0.0);
        PhiParams { lambda, s, n }
    }

    /// 4λ / (S²N)
    pub fn kappa(&self) -> Dd {
        Dd::from_f64(4.0) * Dd::from_f64(self.lambda)
            / (Dd::from_f64(self.s) * Dd::from_f64(self.s) * Dd::from_f64(self.n))
    }

    /// Natural log of the potential at value `x` after `t` non-trivial steps.
    pub fn ln_phi(&self, x: Dd, t: f64) -> Dd {
        let half = Dd::from_f64(self.lambda).mul_f64(0.5);
        let drift = half * (Dd::ONE + Dd::from_f64(t) / Dd::from_f64(self.n));
        self.kappa() * (x - drift)
    }

    pub fn phi(&self, x: Dd, t: f64) -> Dd {
        self.ln_phi(x, t).exp()
    }
}

/// φ(X, t, λ, S, N) = exp((4λ/(S²N))·(X − (λ/2)(1 + t/N))).
pub fn phi(x: f64, t: f64, lambda: f64, s: f64, n: f64) -> Dd {
    PhiParams::new(lambda, s, n).phi(Dd::from_f64(x), t)
}

/// Derandomization settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DerandConfig {
    pub mode: FamilyMode,
    pub sizes: SizeOverrides,
}

impl Default for DerandConfig {
    fn default() -> DerandConfig {
        DerandConfig {
            mode: FamilyMode::Exact { budget: 1_000_000 },
            sizes: SizeOverrides::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_identities() {
        let v = phi(0.0, 0.0, 1.0, 1.0, 1.0).to_f64();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.135_335_283_236_612_7).abs() < 1e-15);
        let one = phi(2.5, 7.0, 2.5, 3.0, 7.0);
        assert!((one - Dd::ONE).abs().to_f64() < 1e-30);
        for &(l, s, n) in &[(0.5, 2.0, 10.0), (3.0, 0.7, 100.0), (10.0, 24.0, 64.0)] {
            let got = phi(0.0, 0.0, l, s, n).to_f64();
            let want = (-2.0 * l * l / (s * s * n)).exp();
            assert!(((got - want) / want).abs() < 1e-13);
        }
    }

    #[test]
    fn phi_increasing_in_x() {
        let p = PhiParams::new(1.5, 2.0, 30.0);
        let mut prev = p.phi(Dd::from_f64(-10.0), 3.0);
        for i in -99..100 {
            let cur = p.phi(Dd::from_f64(i as f64 / 10.0), 3.0);
            assert!(cur > prev);
            prev = cur;
        }
    }
}
