use crate::error::{Error, Result};
use crate::numeric::Dd;
use serde::{Deserialize, Serialize};

/// Tunable constants. `None` means the default derived from the others.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Constants {
    pub c_eps: f64,
    pub c_a: f64,
    pub c_k: Option<f64>,
    pub alpha: Option<f64>,
}

impl Default for Constants {
    fn default() -> Constants {
        Constants {
            c_eps: 10.0,
            c_a: 4.0,
            c_k: None,
            alpha: None,
        }
    }
}

/// Probabilities are stored as numerators over `den = Δ^10`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    pub delta: usize,
    pub den: u128,
}

impl Grid {
    pub fn new(delta: usize) -> Result<Grid> {
        // Products of two numerators and a count must fit in u128.
        if delta > 84 {
            return Err(Error::GridOverflow(delta));
        }
        Ok(Grid {
            delta,
            den: (delta.max(1) as u128).pow(10),
        })
    }

    pub fn to_dd(&self, num: u128) -> Dd {
        Dd::ratio(num, self.den)
    }

    pub fn to_f64(&self, num: u128) -> f64 {
        num as f64 / self.den as f64
    }

    /// Largest numerator whose value does not exceed `x`.
    pub fn floor_of(&self, x: Dd) -> u128 {
        let scaled = x * Dd::from_u128(self.den);
        if scaled.hi <= 0.0 {
            return 0;
        }
        if scaled.hi >= 1e38 {
            return u128::MAX;
        }
        let h = scaled.hi.floor();
        let mut v = h as i128;
        if h == scaled.hi {
            v += scaled.lo.floor() as i128;
        }
        v.max(0) as u128
    }

    pub fn nearest(&self, x: Dd) -> u128 {
        self.floor_of(x + Dd::from_f64(0.5) / Dd::from_u128(self.den))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub delta: usize,
    pub eps: f64,
    pub constants: Constants,
    pub a: f64,
    pub alpha: f64,
    pub c_k: f64,
    pub bad_threshold: f64,
    pub dangerous_threshold: f64,
    pub grid: Grid,
    /// Vertex is bad once its badness counter reaches this.
    pub bad_count: u32,
    /// Vertex is dangerous once it has this many bad neighbors.
    pub dangerous_count: u32,
    /// Numerators `p` with `p <= cap_num` satisfy `p / den <= A`.
    pub cap_num: u128,
    /// Initial numerator for every (edge, color).
    pub p0: u128,
}

/// Slack absorbing float noise when a real threshold lands on an integer.
const THRESHOLD_SLACK: f64 = 1e-9;

impl Params {
    pub fn new(delta: usize, eps: f64) -> Result<Params> {
        Params::with_constants(delta, eps, Constants::default())
    }

    pub fn with_constants(delta: usize, eps: f64, constants: Constants) -> Result<Params> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParams(format!("epsilon must lie in (0,1), got {eps}")));
        }
        if delta == 0 {
            return Err(Error::InvalidParams("delta must be positive".into()));
        }
        let grid = Grid::new(delta)?;
        let d = delta as f64;
        let a = constants.c_a / (eps * eps * d);
        let alpha = constants.alpha.unwrap_or(eps.powi(3) / 100.0);
        let c_k = constants.c_k.unwrap_or(35.0 * constants.c_a * constants.c_a);
        let bad_threshold = 2.0 * c_k * eps * d;
        let dangerous_threshold = alpha * d;
        let count = |x: f64| -> u32 { (x - THRESHOLD_SLACK).ceil().clamp(0.0, u32::MAX as f64) as u32 };
        let a_dd = Dd::from_f64(constants.c_a) / (Dd::from_f64(eps) * Dd::from_f64(eps) * Dd::from_f64(d));
        let cap_num = if a >= 1.0 { grid.den } else { grid.floor_of(a_dd) };
        let p0 = grid.nearest((Dd::ONE - Dd::from_f64(eps)) / Dd::from_f64(d));
        Ok(Params {
            delta,
            eps,
            constants,
            a,
            alpha,
            c_k,
            bad_threshold,
            dangerous_threshold,
            grid,
            bad_count: count(bad_threshold).max(1),
            dangerous_count: count(dangerous_threshold).max(1),
            cap_num,
            p0,
        })
    }

    /// Whether `eps >= c_eps * (sqrt(log n) / Δ)^(1/16)`, the regime the
    /// guarantees are stated for. Reported, never enforced.
    pub fn regime_ok(&self, n: usize) -> bool {
        let ln = (n.max(2) as f64).ln();
        self.eps >= self.constants.c_eps * (ln.sqrt() / self.delta as f64).powf(1.0 / 16.0)
    }

    pub fn den(&self) -> u128 {
        self.grid.den
    }
}
