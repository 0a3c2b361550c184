//! Call-by-value reduction as a weighted probabilistic rewrite system.
//!
//! [`step`] performs exactly one rule under the unique evaluation context.
//! [`run`] groups steps into *depth units*: each live term is reduced
//! deterministically, accumulating tick costs, up to and including its next
//! measurement, or until it reaches a value. One depth unit therefore
//! resolves one probabilistic choice per live term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cost::{convex_sum, CostError, Kegelspitze};
use crate::decls::Decls;
use crate::linalg::{apply_unitary, measure_prob, post_measure, tensor, QState, Scalar};
use crate::source::{alpha_eq, pretty, Term};

/// Entries below this weight are dropped and counted as pruned mass.
pub const PRUNE_THRESHOLD: f64 = 1e-15;
/// Amplitude tolerance when merging alpha-equivalent support terms.
pub const MERGE_TOL: f64 = 1e-12;
/// Single steps allowed per term within one depth unit.
pub const UNIT_FUEL: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParsError {
    #[error("stuck term: {0}")]
    StuckTerm(String),
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rule {
    Beta,
    Unitary,
    Meas,
    Tensor,
    Case,
    Letrec,
    Tick,
}

/// `t →c δ`.
#[derive(Debug, Clone)]
pub struct ReductionStep {
    pub rule: Rule,
    pub cost: f64,
    pub result: Vec<(Term, f64)>,
}

/// One reduction step of a closed term; `None` for values.
pub fn step(decls: &Decls, t: &Term) -> Result<Option<ReductionStep>, ParsError> {
    let stuck = || ParsError::StuckTerm(pretty(t));
    let ctx = |inner: &Term, plug: &dyn Fn(Term) -> Term| -> Result<Option<ReductionStep>, ParsError> {
        let s = step(decls, inner)?.ok_or_else(stuck)?;
        Ok(Some(ReductionStep {
            rule: s.rule,
            cost: s.cost,
            result: s.result.into_iter().map(|(u, p)| (plug(u), p)).collect(),
        }))
    };
    let det = |rule, u: Term| Ok(Some(ReductionStep { rule, cost: 0.0, result: vec![(u, 1.0)] }));
    match t {
        Term::Var(_) | Term::Lam(..) | Term::Ket(_) | Term::Letrec(_) => Ok(None),
        Term::Tick(u) => Ok(Some(ReductionStep { rule: Rule::Tick, cost: 1.0, result: vec![((**u).clone(), 1.0)] })),
        Term::App(f, a) => {
            if !a.is_value() {
                return ctx(a, &|u| Term::App(f.clone(), Box::new(u)));
            }
            if !f.is_value() {
                return ctx(f, &|u| Term::App(Box::new(u), a.clone()));
            }
            match &**f {
                Term::Lam(x, body) => det(Rule::Beta, body.subst(&[(x.clone(), (**a).clone())])),
                Term::Letrec(l) => det(
                    Rule::Letrec,
                    l.body.subst(&[(l.fun.clone(), (**f).clone()), (l.param.clone(), (**a).clone())]),
                ),
                _ => Err(stuck()),
            }
        }
        Term::Gate(g, a) => {
            if !a.is_value() {
                return ctx(a, &|u| Term::Gate(g.clone(), Box::new(u)));
            }
            match (&**a, decls.gates.get(g)) {
                (Term::Ket(psi), Some(u)) => det(Rule::Unitary, Term::Ket(apply_unitary(u, psi))),
                _ => Err(stuck()),
            }
        }
        Term::Meas(a) => {
            if !a.is_value() {
                return ctx(a, &|u| Term::Meas(Box::new(u)));
            }
            let Term::Ket(psi) = &**a else { return Err(stuck()) };
            let mut result = Vec::with_capacity(2);
            for (bit, inj) in [(0u8, "inj0"), (1, "inj1")] {
                let p = measure_prob(bit, psi);
                if p > <f64 as Scalar>::zero_prob_tol() {
                    result.push((Term::Cons(inj.into(), vec![], vec![Term::Ket(post_measure(bit, psi))]), p));
                }
            }
            Ok(Some(ReductionStep { rule: Rule::Meas, cost: 0.0, result }))
        }
        Term::Tensor(a, b) => {
            if !b.is_value() {
                return ctx(b, &|u| Term::Tensor(a.clone(), Box::new(u)));
            }
            if !a.is_value() {
                return ctx(a, &|u| Term::Tensor(Box::new(u), b.clone()));
            }
            match (&**a, &**b) {
                (Term::Ket(p), Term::Ket(q)) => det(Rule::Tensor, Term::Ket(tensor(p, q))),
                _ => Err(stuck()),
            }
        }
        Term::Cons(c, cl, qu) => {
            if let Some(i) = qu.iter().rposition(|u| !u.is_value()) {
                return ctx(&qu[i], &|u| {
                    let mut qu = qu.clone();
                    qu[i] = u;
                    Term::Cons(c.clone(), cl.clone(), qu)
                });
            }
            if let Some(i) = cl.iter().rposition(|u| !u.is_value()) {
                return ctx(&cl[i], &|u| {
                    let mut cl = cl.clone();
                    cl[i] = u;
                    Term::Cons(c.clone(), cl, qu.clone())
                });
            }
            Ok(None)
        }
        Term::Case(s, arms, def) => {
            if !s.is_value() {
                return ctx(s, &|u| Term::Case(Box::new(u), arms.clone(), def.clone()));
            }
            if let Term::Cons(c, vs, ws) = &**s {
                if let Some(arm) = arms.iter().find(|a| &a.cons == c) {
                    let sub: Vec<(String, Term)> = arm
                        .classical
                        .iter()
                        .cloned()
                        .zip(vs.iter().cloned())
                        .chain(arm.quantum.iter().cloned().zip(ws.iter().cloned()))
                        .collect();
                    return det(Rule::Case, arm.body.subst(&sub));
                }
            }
            match def {
                Some((y, body)) => det(Rule::Case, body.subst(&[(y.clone(), (**s).clone())])),
                None => Err(stuck()),
            }
        }
    }
}

/// Finite subdistribution over terms.
#[derive(Debug, Clone, Default)]
pub struct WeightedDist {
    pub entries: Vec<(Term, f64)>,
}

impl WeightedDist {
    pub fn point(t: Term) -> Self {
        WeightedDist { entries: vec![(t, 1.0)] }
    }

    pub fn mass(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds weight, merging with an alpha-equivalent entry if present.
    pub fn add(&mut self, t: Term, p: f64) {
        if let Some(e) = self.entries.iter_mut().find(|(u, _)| alpha_eq(u, &t, MERGE_TOL)) {
            e.1 += p;
        } else {
            self.entries.push((t, p));
        }
    }

    /// Weight of the entry alpha-equivalent to `t`.
    pub fn weight_of(&self, t: &Term) -> f64 {
        self.entries.iter().filter(|(u, _)| alpha_eq(u, t, MERGE_TOL)).map(|(_, p)| p).sum()
    }

    /// Drops entries below [`PRUNE_THRESHOLD`]; returns the dropped mass.
    pub fn prune(&mut self) -> f64 {
        let mut dropped = 0.0;
        self.entries.retain(|(_, p)| {
            if *p < PRUNE_THRESHOLD {
                dropped += p;
                false
            } else {
                true
            }
        });
        dropped
    }
}

/// Result of one lifted step `δ ⇒c δ'`.
#[derive(Debug, Clone)]
pub struct LiftedStep {
    pub cost: f64,
    pub result: WeightedDist,
    pub pruned: f64,
}

/// Rewrites every non-terminal support element once; terminals are carried.
pub fn lift_step(decls: &Decls, dist: &WeightedDist) -> Result<LiftedStep, ParsError> {
    let mut out = WeightedDist::default();
    let mut cost = 0.0;
    for (t, p) in &dist.entries {
        match step(decls, t)? {
            None => out.add(t.clone(), *p),
            Some(s) => {
                cost += p * s.cost;
                for (u, q) in s.result {
                    out.add(u, p * q);
                }
            }
        }
    }
    let pruned = out.prune();
    Ok(LiftedStep { cost, result: out, pruned })
}

/// Cost and mass after each depth unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthStat {
    pub depth: usize,
    pub cost: f64,
    pub nf_mass: f64,
    pub live_mass: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub depth: usize,
    /// Lower bound on the expected cost.
    pub accumulated_cost: f64,
    pub live: WeightedDist,
    pub normal_forms: WeightedDist,
    pub pruned: f64,
    pub trace: Vec<DepthStat>,
}

impl RunReport {
    /// Mass not yet in normal form: bounds what further depth can add to `nf`.
    pub fn residual_mass(&self) -> f64 {
        self.live.mass() + self.pruned
    }
}

struct Unit {
    cost: f64,
    out: Vec<(Term, f64)>,
}

fn advance(decls: &Decls, t: &Term) -> Result<Unit, ParsError> {
    let mut cur = t.clone();
    let mut cost = 0.0;
    for _ in 0..UNIT_FUEL {
        match step(decls, &cur)? {
            None => return Ok(Unit { cost, out: vec![(cur, 1.0)] }),
            Some(s) => {
                cost += s.cost;
                if s.rule == Rule::Meas {
                    return Ok(Unit { cost, out: s.result });
                }
                cur = s.result.into_iter().next().expect("deterministic rule").0;
            }
        }
    }
    Ok(Unit { cost, out: vec![(cur, 1.0)] })
}

/// Runs `max_depth` depth units from `{t¹}`.
pub fn run(decls: &Decls, t: &Term, max_depth: usize) -> Result<RunReport, ParsError> {
    let mut live = WeightedDist::default();
    let mut nf = WeightedDist::default();
    if t.is_value() {
        nf.add(t.clone(), 1.0);
    } else {
        live.add(t.clone(), 1.0);
    }
    let mut cost = 0.0;
    let mut pruned = 0.0;
    let mut trace = vec![DepthStat { depth: 0, cost: 0.0, nf_mass: nf.mass(), live_mass: live.mass() }];
    for d in 1..=max_depth {
        if live.is_empty() {
            trace.push(DepthStat { depth: d, cost, nf_mass: nf.mass(), live_mass: 0.0 });
            continue;
        }
        let mut next = WeightedDist::default();
        for (u, p) in &live.entries {
            let unit = advance(decls, u)?;
            cost += p * unit.cost;
            for (v, q) in unit.out {
                if v.is_value() {
                    nf.add(v, p * q);
                } else {
                    next.add(v, p * q);
                }
            }
        }
        pruned += next.prune();
        live = next;
        trace.push(DepthStat { depth: d, cost, nf_mass: nf.mass(), live_mass: live.mass() });
    }
    Ok(RunReport { depth: max_depth, accumulated_cost: cost, live, normal_forms: nf, pruned, trace })
}

/// Literal small-step run: `n` applications of [`lift_step`].
pub fn run_steps(decls: &Decls, t: &Term, n: usize) -> Result<Vec<LiftedStep>, ParsError> {
    let mut dist = WeightedDist::point(t.clone());
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let s = lift_step(decls, &dist)?;
        dist = s.result.clone();
        out.push(s);
    }
    Ok(out)
}

pub fn ecost_lower(decls: &Decls, t: &Term, max_depth: usize) -> Result<f64, ParsError> {
    Ok(run(decls, t, max_depth)?.accumulated_cost)
}

pub fn nf_dist(decls: &Decls, t: &Term, max_depth: usize) -> Result<WeightedDist, ParsError> {
    Ok(run(decls, t, max_depth)?.normal_forms)
}

/// `Σ_b nf(b) · f(b)` as a convex sum in `k`.
pub fn evalue_of<K, F>(k: &K, nf: &WeightedDist, mut f: F) -> Result<K::Elem, ParsError>
where
    K: Kegelspitze<Scalar = f64>,
    F: FnMut(&Term) -> Result<K::Elem, ParsError>,
{
    let mass = nf.mass();
    // rounding can push the total a hair above one
    let scale = if mass > 1.0 { 1.0 / mass } else { 1.0 };
    let mut pairs = Vec::with_capacity(nf.entries.len());
    for (t, p) in &nf.entries {
        pairs.push(((p * scale).min(1.0), f(t)?));
    }
    Ok(convex_sum(k, &pairs)?)
}

pub fn evalue<K, F>(decls: &Decls, t: &Term, f: F, max_depth: usize, k: &K) -> Result<K::Elem, ParsError>
where
    K: Kegelspitze<Scalar = f64>,
    F: FnMut(&Term) -> Result<K::Elem, ParsError>,
{
    evalue_of(k, &nf_dist(decls, t, max_depth)?, f)
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleReport {
    pub seed: u64,
    pub trials: usize,
    pub mean_cost: f64,
    /// Standard error of `mean_cost`.
    pub std_err: f64,
    /// Normal forms (printed, amplitudes rounded) and their counts.
    pub histogram: Vec<(String, usize)>,
    /// Trials stopped by the step budget; excluded from the mean.
    pub guard_hits: usize,
}

/// Monte-Carlo execution: measurements resolved by seeded draws. Trial `k`
/// uses stream `k` of a ChaCha generator seeded with `seed`.
pub fn sample(decls: &Decls, t: &Term, seed: u64, trials: usize, step_budget: usize) -> Result<SampleReport, ParsError> {
    let mut costs = Vec::with_capacity(trials);
    let mut hist: std::collections::BTreeMap<String, usize> = Default::default();
    let mut guard_hits = 0;
    for k in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut cur = t.clone();
        let mut cost = 0.0;
        let mut finished = false;
        for _ in 0..step_budget {
            match step(decls, &cur)? {
                None => {
                    finished = true;
                    break;
                }
                Some(s) => {
                    cost += s.cost;
                    let total: f64 = s.result.iter().map(|(_, p)| p).sum();
                    let mut draw = rng.gen::<f64>() * total;
                    let n = s.result.len();
                    let mut chosen = None;
                    for (i, (u, p)) in s.result.into_iter().enumerate() {
                        if draw < p || i + 1 == n {
                            chosen = Some(u);
                            break;
                        }
                        draw -= p;
                    }
                    match chosen {
                        Some(u) => cur = u,
                        None => return Err(ParsError::StuckTerm(pretty(&cur))),
                    }
                }
            }
        }
        if finished {
            costs.push(cost);
            *hist.entry(outcome_key(&cur)).or_default() += 1;
        } else {
            guard_hits += 1;
        }
    }
    let n = costs.len().max(1) as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(SampleReport {
        seed,
        trials,
        mean_cost: mean,
        std_err: (var / n).sqrt(),
        histogram: hist.into_iter().collect(),
        guard_hits,
    })
}

fn round_kets(t: &Term) -> Term {
    match t {
        Term::Ket(psi) => {
            let amps = psi
                .amplitudes()
                .iter()
                .map(|a| {
                    let r = |x: f64| {
                        let y = (x * 1e6).round() / 1e6;
                        if y == 0.0 { 0.0 } else { y }
                    };
                    num_complex::Complex::new(r(a.re), r(a.im))
                })
                .collect();
            Term::Ket(QState::renormalized(amps, f64::INFINITY).unwrap_or_else(|_| psi.clone()))
        }
        Term::Cons(c, cl, qu) => Term::Cons(c.clone(), cl.iter().map(round_kets).collect(), qu.iter().map(round_kets).collect()),
        other => other.clone(),
    }
}

/// Printed normal form with amplitudes rounded to six decimals.
pub fn outcome_key(t: &Term) -> String {
    pretty(&round_kets(t))
}
