//! Exact replay of the potential Φ from the recorded transitions, in
//! rational arithmetic with a fixed-point exponential.

use edgecolor_core::derand::{DerandConfig, PotentialState, TermKey};
use edgecolor_core::graph::{EdgeId, Graph, VertexId};
use edgecolor_core::numeric::Dd;
use edgecolor_core::online::{EntryKind, LineTag, Params, Transition};
use edgecolor_core::slocal::{Algorithm, Engine};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::HashMap;

/// Fractional bits of the fixed-point exponential.
const PREC: usize = 320;

pub fn rat_u(x: u128) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

pub fn rat_f(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

pub fn rat_dd(x: Dd) -> BigRational {
    rat_f(x.hi) + rat_f(x.lo)
}

fn ln2_fixed() -> BigInt {
    // ln 2 = Σ_{k≥1} 1/(k·2^k), with 32 guard bits.
    let one = BigInt::one() << (PREC + 32);
    let mut s = BigInt::zero();
    for k in 1..=(PREC + 40) {
        s += (&one >> k) / BigInt::from(k);
    }
    s >> 32
}

/// exp(x) as a fixed-point integer over 2^PREC.
pub struct Exp {
    ln2: BigInt,
}

impl Exp {
    pub fn new() -> Exp {
        Exp { ln2: ln2_fixed() }
    }

    pub fn fixed(&self, x: &BigRational) -> BigInt {
        let approx = x.to_f64().expect("finite ln");
        let k = (approx / std::f64::consts::LN_2).round() as i64;
        let xf = (x.numer() << PREC) / x.denom();
        let r = xf - &self.ln2 * BigInt::from(k);
        let one = BigInt::one() << PREC;
        let mut sum = one.clone();
        let mut term = one;
        for i in 1u32.. {
            term = (term * &r) >> PREC;
            term /= BigInt::from(i);
            if term.is_zero() {
                break;
            }
            sum += &term;
        }
        if k >= 0 {
            sum << k as usize
        } else {
            sum >> (-k) as usize
        }
    }
}

impl Default for Exp {
    fn default() -> Self {
        Exp::new()
    }
}

struct OTerm {
    key: TermKey,
    weight: u32,
    lambda: BigRational,
    s: BigRational,
    n: BigRational,
    x0: BigRational,
    /// Accumulated value for −L, H and X; Q and K are read off the state.
    acc: BigRational,
    steps: u64,
}

#[derive(Clone)]
struct QCell {
    frozen: BigRational,
    prod: BigRational,
    live: u128,
}

impl QCell {
    fn value(&self, den: &BigRational) -> BigRational {
        &self.frozen + &self.prod * rat_u(self.live) / den
    }
}

/// Independent bookkeeping of every registered term, fed one transition at a time.
pub struct PhiReplay {
    params: Params,
    den: u128,
    den_q: BigRational,
    p: Vec<Vec<u128>>,
    q: HashMap<VertexId, Vec<QCell>>,
    terms: Vec<OTerm>,
    q_by_vertex: HashMap<VertexId, Vec<usize>>,
    kl_by_edge: Vec<Vec<usize>>,
    ux_by_vertex: HashMap<VertexId, Vec<usize>>,
    stamp: Vec<usize>,
    clock: usize,
    exp: Exp,
}

#[derive(Clone, Debug, Default)]
pub struct Comparison {
    pub terms: usize,
    pub step_mismatches: usize,
    /// Largest |lnφ_incr − lnφ_exact| / max(1, |lnφ_exact|) over terms.
    pub max_term_rel: f64,
    /// |Φ_incr − Φ_exact| / Φ_exact.
    pub total_rel: f64,
    pub total: f64,
}

fn expected_params(p: &Params, key: &TermKey) -> (f64, f64, f64) {
    let (eps, d) = (p.eps, p.delta as f64);
    let s = 24.0 * p.a;
    match key {
        TermKey::Q { .. } => (eps.powi(6) * d / 2.0, s, d * d),
        TermKey::K { m, colors } | TermKey::NegL { m, colors } => {
            (eps * (m.len() * colors.len()) as f64 / (2.0 * d), s, 2.0 * m.len() as f64 * d)
        }
        TermKey::H { u } => (eps * p.alpha * d * d, 1.0, (p.alpha * d * d).max(u.len() as f64 * d)),
        TermKey::X { u, .. } => {
            (2.0 * eps.powi(3) * d * d * (1.0 - eps / 2.0), 2.0, (eps * d * d).max(u.len() as f64 * d))
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * b.abs().max(1e-300)
}

impl PhiReplay {
    /// Takes the term set from a freshly registered state; fails if any
    /// term's (λ, S, N) deviates from its defining formula.
    pub fn new(g: &Graph, params: &Params, pot: &PotentialState, p0: Vec<Vec<u128>>) -> Result<PhiReplay, String> {
        let den = params.den();
        let den_q = rat_u(den);
        let mut terms = Vec::new();
        let mut q_by_vertex: HashMap<VertexId, Vec<usize>> = HashMap::new();
        let mut kl_by_edge = vec![Vec::new(); g.m()];
        let mut ux_by_vertex: HashMap<VertexId, Vec<usize>> = HashMap::new();
        let mut q = HashMap::new();
        for t in pot.terms() {
            let (l, s, n) = expected_params(params, &t.key);
            let pp = t.phi_params;
            if !(close(pp.lambda, l) && close(pp.s, s) && close(pp.n, n)) {
                return Err(format!("term {:?} has (λ,S,N)=({},{},{}), expected ({l},{s},{n})", t.key, pp.lambda, pp.s, pp.n));
            }
            let id = terms.len();
            let x0 = match &t.key {
                TermKey::Q { w, colors } => {
                    q.entry(*w).or_insert_with(|| {
                        (0..params.delta)
                            .map(|c| QCell {
                                frozen: BigRational::zero(),
                                prod: BigRational::one(),
                                live: g.incident(*w).iter().map(|&f| p0[f][c]).sum(),
                            })
                            .collect::<Vec<_>>()
                    });
                    q_by_vertex.entry(*w).or_default().push(id);
                    colors.iter().flat_map(|&c| g.incident(*w).iter().map(move |&f| (f, c))).map(|(f, c)| rat_u(p0[f][c as usize - 1])).sum::<BigRational>()
                        / &den_q
                }
                TermKey::K { m, colors } => {
                    for &f in m {
                        kl_by_edge[f].push(id);
                    }
                    m.iter().flat_map(|&f| colors.iter().map(move |&c| (f, c))).map(|(f, c)| rat_u(p0[f][c as usize - 1])).sum::<BigRational>()
                        / &den_q
                }
                TermKey::NegL { m, .. } => {
                    for &f in m {
                        kl_by_edge[f].push(id);
                    }
                    BigRational::zero()
                }
                TermKey::H { u } | TermKey::X { u, .. } => {
                    for &v in u {
                        ux_by_vertex.entry(v).or_default().push(id);
                    }
                    BigRational::zero()
                }
            };
            terms.push(OTerm {
                key: t.key.clone(),
                weight: t.weight(),
                lambda: rat_f(pp.lambda),
                s: rat_f(pp.s),
                n: rat_f(pp.n),
                x0,
                acc: BigRational::zero(),
                steps: 0,
            });
        }
        let nterms = terms.len();
        Ok(PhiReplay {
            params: params.clone(),
            den,
            den_q,
            p: p0,
            q,
            terms,
            q_by_vertex,
            kl_by_edge,
            ux_by_vertex,
            stamp: vec![usize::MAX; nterms],
            clock: 0,
            exp: Exp::new(),
        })
    }

    fn step(&mut self, id: usize) {
        if self.stamp[id] != self.clock {
            self.stamp[id] = self.clock;
            self.terms[id].steps += 1;
        }
    }

    pub fn apply(&mut self, g: &Graph, tr: &Transition) -> Result<(), String> {
        self.clock += 1;
        let d = self.params.delta;
        let e = tr.edge;
        let [a, b] = g.endpoints(e);
        if tr.p_before != self.p[e] {
            return Err(format!("edge {e}: P_before differs from the replayed vector"));
        }
        let good = tr.line.endpoints_good();

        // Per-vertex change of the unarrived sums.
        let mut dl: Vec<(VertexId, Vec<i128>)> = vec![(a, vec![0; d]), (b, vec![0; d])];
        for up in &tr.updates {
            for v in g.endpoints(up.f) {
                let i = match dl.iter().position(|x| x.0 == v) {
                    Some(i) => i,
                    None => {
                        dl.push((v, vec![0; d]));
                        dl.len() - 1
                    }
                };
                for x in &up.entries {
                    dl[i].1[x.c as usize - 1] += x.new as i128 - x.old as i128;
                }
            }
        }
        for (w, delta) in &dl {
            let Some(cells) = self.q.get_mut(w) else { continue };
            let mut moved = vec![false; d];
            for c in 0..d {
                let before = cells[c].value(&self.den_q);
                let cell = &mut cells[c];
                if *w == a || *w == b {
                    let p = tr.p_before[c];
                    if p > self.den {
                        return Err(format!("edge {e}: P_e{} exceeds 1", c + 1));
                    }
                    let pr = rat_u(p) / &self.den_q;
                    cell.frozen = &cell.frozen + &cell.prod * &pr;
                    cell.prod = &cell.prod * (BigRational::one() - pr);
                    cell.live = (cell.live as i128 - p as i128 + delta[c]) as u128;
                } else {
                    cell.live = (cell.live as i128 + delta[c]) as u128;
                }
                moved[c] = cells[c].value(&self.den_q) != before;
            }
            for id in self.q_by_vertex.get(w).cloned().unwrap_or_default() {
                if self.terms[id].key.colors().iter().any(|&c| moved[c as usize - 1]) {
                    self.step(id);
                }
            }
        }

        // K and −L.
        for up in &tr.updates {
            for x in &up.entries {
                if self.p[up.f][x.c as usize - 1] != x.old {
                    return Err(format!("edge {}: entry {} old value differs from replay", up.f, x.c));
                }
            }
            for id in self.kl_by_edge[up.f].clone() {
                let t = &self.terms[id];
                let mut stepped = false;
                let mut inc = BigRational::zero();
                for x in up.entries.iter().filter(|x| t.key.colors().contains(&x.c)) {
                    match t.key {
                        TermKey::K { .. } => stepped |= x.new != x.old,
                        _ if good => {
                            let bar = match x.kind {
                                EntryKind::Zeroed | EntryKind::Degenerate => BigRational::zero(),
                                EntryKind::Scaled { .. } => rat_u(x.new) / &self.den_q,
                                EntryKind::Capped { num, den } | EntryKind::Clamped { num, den } => rat_u(num) / rat_u(den),
                            };
                            inc += bar - rat_u(x.old) / &self.den_q;
                            stepped |= !(matches!(x.kind, EntryKind::Scaled { .. }) && x.new == x.old);
                        }
                        _ => {}
                    }
                }
                self.terms[id].acc += inc;
                if stepped {
                    self.step(id);
                }
            }
            for x in &up.entries {
                self.p[up.f][x.c as usize - 1] = x.new;
            }
        }

        // H and X.
        let z: u128 = tr.p_before.iter().sum();
        let eps = rat_f(self.params.eps);
        let cke = rat_f(self.params.c_k) * &eps;
        let h_ok = good && z <= self.den && rat_u(z) / &self.den_q >= BigRational::one() - &cke;
        let h_inc = if tr.line.marked() { BigRational::one() - &cke } else { -cke.clone() };
        let mut ids: Vec<usize> = [a, b].iter().flat_map(|v| self.ux_by_vertex.get(v).cloned().unwrap_or_default()).collect();
        ids.sort_unstable();
        ids.dedup();
        for id in ids {
            let inc = match &self.terms[id].key {
                TermKey::H { .. } => h_ok.then(|| h_inc.clone()),
                TermKey::X { colors, u } => {
                    let s = [a, b].iter().filter(|v| u.contains(v)).count();
                    let zc: u128 = colors.iter().map(|&c| tr.p_before[c as usize - 1]).sum();
                    let rate = (BigRational::one() - &eps / rat_u(2)) * rat_u(colors.len() as u128) / rat_u(d as u128);
                    let hit = tr.line == LineTag::Color && tr.main_color.is_some_and(|c| colors.contains(&c));
                    let hit = if hit { BigRational::one() } else { BigRational::zero() };
                    (good && rat_u(zc) / &self.den_q <= rate).then(|| (hit - rate) * rat_u(s as u128))
                }
                _ => unreachable!(),
            };
            if let Some(inc) = inc.filter(|x| !x.is_zero()) {
                self.terms[id].acc += inc;
                self.step(id);
            }
        }
        Ok(())
    }

    /// The shifted argument X of a term in the current state.
    fn x_of(&self, g: &Graph, t: &OTerm) -> BigRational {
        match &t.key {
            TermKey::Q { w, colors } => {
                let cells = &self.q[w];
                colors.iter().map(|&c| cells[c as usize - 1].value(&self.den_q)).sum::<BigRational>() - &t.x0
            }
            TermKey::K { m, colors } => {
                let _ = g;
                m.iter().flat_map(|&f| colors.iter().map(move |&c| (f, c))).map(|(f, c)| rat_u(self.p[f][c as usize - 1])).sum::<BigRational>()
                    / &self.den_q
                    - &t.x0
            }
            TermKey::NegL { .. } => -t.acc.clone(),
            TermKey::H { .. } | TermKey::X { .. } => t.acc.clone(),
        }
    }

    fn ln_phi(&self, g: &Graph, t: &OTerm) -> BigRational {
        let kappa = rat_u(4) * &t.lambda / (&t.s * &t.s * &t.n);
        let drift = &t.lambda / rat_u(2) * (BigRational::one() + rat_u(t.steps as u128) / &t.n);
        kappa * (self.x_of(g, t) - drift)
    }

    /// Compares the incremental state against the exact values.
    pub fn compare(&self, g: &Graph, pot: &PotentialState) -> Comparison {
        let mut out = Comparison { terms: self.terms.len(), ..Comparison::default() };
        let mut sum = BigInt::zero();
        for (t, it) in self.terms.iter().zip(pot.terms()) {
            assert_eq!(t.key, it.key, "term order changed");
            if t.steps != it.steps {
                out.step_mismatches += 1;
            }
            let ln = self.ln_phi(g, t);
            let err = (rat_dd(it.ln_phi) - &ln).abs();
            let scale = ln.abs().max(BigRational::one());
            out.max_term_rel = out.max_term_rel.max((err / scale).to_f64().unwrap_or(f64::INFINITY));
            sum += self.exp.fixed(&ln) * BigInt::from(t.weight);
        }
        let exact = BigRational::new(sum, BigInt::one() << PREC);
        let err = (rat_dd(pot.total()) - &exact).abs();
        out.total_rel = if exact.is_zero() { err.to_f64().unwrap_or(f64::INFINITY) } else { (err / &exact).to_f64().unwrap_or(f64::INFINITY) };
        out.total = exact.to_f64().unwrap_or(f64::NAN);
        out
    }
}

#[derive(Clone, Debug, Default)]
pub struct ReplayReport {
    pub checkpoints: Vec<Comparison>,
    /// Largest Φ change of an outcome picked by the chooser (not forced).
    pub max_chosen_delta: f64,
    pub mode_used: &'static str,
}

/// Runs the deterministic algorithm at locality 5 over `order`, comparing
/// incremental and exact Φ at `checks` evenly spaced points plus the start.
pub fn replay_run(g: &Graph, params: Params, order: &[EdgeId], derand: DerandConfig, checks: usize) -> Result<ReplayReport, String> {
    let alg = Algorithm::Deterministic { derand };
    let mut eng = Engine::new(g, params.clone(), &alg, 5, false).map_err(|e| e.to_string())?;
    let p0: Vec<Vec<u128>> = (0..g.m()).map(|f| eng.state.p(f).to_vec()).collect();
    let pot = eng.potentials().expect("deterministic");
    let mode_used = pot.mode_used;
    let mut replay = PhiReplay::new(g, &params, pot, p0)?;
    let mut report = ReplayReport { mode_used, ..ReplayReport::default() };
    report.checkpoints.push(replay.compare(g, pot));
    let m = order.len();
    let every = m.div_ceil(checks.max(1)).max(1);
    for (i, &e) in order.iter().enumerate() {
        let step = eng.decide(e).map_err(|x| format!("edge {e}: {x}"))?;
        let tr = eng.state.plan(g, &step.decision).map_err(|x| x.to_string())?;
        eng.commit(step).map_err(|x| x.to_string())?;
        replay.apply(g, &tr)?;
        if (i + 1) % every == 0 || i + 1 == m {
            report.checkpoints.push(replay.compare(g, eng.potentials().expect("deterministic")));
        }
    }
    let run = eng.finish();
    let chosen = [LineTag::Color.name(), LineTag::MarkBot.name()];
    report.max_chosen_delta = run
        .trace
        .unwrap_or_default()
        .iter()
        .filter(|r| chosen.contains(&r.line.as_str()))
        .map(|r| r.delta)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(report)
}
