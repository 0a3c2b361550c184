//! Formula evaluation and the sampling validity oracle.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::cs::CsType;
use crate::decls::Decls;
use crate::linalg::{apply_unitary, measure_prob, post_measure, tensor, QState};
use crate::syntax::{fmt_ket, fmt_real};

use super::{fresh_name, CtxEntry, Defs, FExpr, Formula, Op, RefContext, RefType, Rel, Structure};

/// Slack for comparisons between computed reals and states.
pub const VALIDITY_TOL: f64 = 1e-9;
pub const DEFAULT_SEED: u64 = 0x5eed;
pub const DEFAULT_SAMPLES: usize = 1000;
const CALL_DEPTH: usize = 64;

/// Semantic values of formula expressions.
#[derive(Debug, Clone, PartialEq)]
pub enum FVal {
    Real(f64),
    State(QState<f64>),
    Data(String, Vec<FVal>),
    /// A candidate function, by name.
    Func(String),
}

impl fmt::Display for FVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FVal::Real(r) if r.is_infinite() => f.write_str("inf"),
            FVal::Real(r) => f.write_str(&fmt_real(*r)),
            FVal::State(st) => f.write_str(&fmt_ket(st)),
            FVal::Data(c, args) if args.is_empty() => f.write_str(c),
            FVal::Data(c, args) => {
                let a: Vec<String> = args.iter().map(|v| v.to_string()).collect();
                write!(f, "{c}({})", a.join(", "))
            }
            FVal::Func(g) => f.write_str(g),
        }
    }
}

impl Serialize for FVal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl FVal {
    /// Value as an expression, so that witnesses can be pasted into formulae.
    pub fn to_fexpr(&self) -> FExpr {
        match self {
            FVal::Real(r) => FExpr::Num(*r),
            FVal::State(st) => FExpr::Ket(st.clone()),
            FVal::Data(c, args) => FExpr::Cons(c.clone(), args.iter().map(FVal::to_fexpr).collect()),
            FVal::Func(g) => FExpr::Var(g.clone()),
        }
    }

    fn approx_eq(&self, other: &FVal) -> bool {
        match (self, other) {
            (FVal::Real(a), FVal::Real(b)) => real_eq(*a, *b),
            (FVal::State(a), FVal::State(b)) => a.n_qubits() == b.n_qubits() && a.approx_eq(b, VALIDITY_TOL),
            (FVal::Data(c, xs), FVal::Data(d, ys)) => {
                c == d && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| x.approx_eq(y))
            }
            (FVal::Func(f), FVal::Func(g)) => f == g,
            _ => false,
        }
    }
}

fn real_eq(a: f64, b: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= VALIDITY_TOL * a.abs().max(b.abs()).max(1.0)
}

fn real_le(a: f64, b: f64) -> bool {
    if b == f64::INFINITY {
        return true;
    }
    if a == f64::INFINITY {
        return false;
    }
    a <= b + VALIDITY_TOL * b.abs().max(1.0)
}

pub type Valuation = BTreeMap<String, FVal>;

fn real(v: FVal, what: &str) -> Result<f64, String> {
    match v {
        FVal::Real(r) => Ok(r),
        other => Err(format!("{what} expects a real, got {other}")),
    }
}

fn state(v: FVal, what: &str) -> Result<QState<f64>, String> {
    match v {
        FVal::State(s) => Ok(s),
        other => Err(format!("{what} expects a quantum state, got {other}")),
    }
}

/// `0 · ∞ = 0`, as in expectations.
fn mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

pub fn eval_expr(defs: &Defs, rho: &Valuation, e: &FExpr) -> Result<FVal, String> {
    eval_in(defs, rho, e, 0)
}

fn eval_in(defs: &Defs, rho: &Valuation, e: &FExpr, depth: usize) -> Result<FVal, String> {
    let ev = |e: &FExpr| eval_in(defs, rho, e, depth);
    Ok(match e {
        FExpr::Var(x) => match rho.get(x) {
            Some(v) => v.clone(),
            None if defs.candidate(x).is_some() => FVal::Func(x.clone()),
            None => return Err(format!("unbound variable `{x}`")),
        },
        FExpr::Num(r) => FVal::Real(*r),
        FExpr::Ket(st) => FVal::State(st.clone()),
        FExpr::Bin(op, a, b) => {
            let x = real(ev(a)?, op.symbol())?;
            let y = real(ev(b)?, op.symbol())?;
            FVal::Real(match op {
                Op::Add => x + y,
                Op::Sub => x - y,
                Op::Mul => mul(x, y),
                Op::Div => x / y,
                Op::CAdd => defs.structure.cadd(x, y),
            })
        }
        FExpr::Bary(a, v, b) => {
            let st = state(ev(v)?, "bary")?;
            let p0 = measure_prob(0, &st);
            let p1 = measure_prob(1, &st);
            // a side with weight exactly 0 is not evaluated
            if p1 == 0.0 {
                FVal::Real(real(ev(a)?, "bary")?)
            } else if p0 == 0.0 {
                FVal::Real(real(ev(b)?, "bary")?)
            } else {
                let x = real(ev(a)?, "bary")?;
                let y = real(ev(b)?, "bary")?;
                FVal::Real(mul(p0, x) + mul(p1, y))
            }
        }
        FExpr::Prob(b, a) => FVal::Real(measure_prob(*b, &state(ev(a)?, "p")?)),
        FExpr::Collapse(b, a) => FVal::State(post_measure(*b, &state(ev(a)?, "collapse")?)),
        FExpr::Gate(g, a) => {
            let st = state(ev(a)?, g)?;
            let u = defs.decls.gates.get(g).ok_or_else(|| format!("unknown gate `{g}`"))?;
            if u.n_qubits() > st.n_qubits() {
                return Err(format!("gate `{g}` is wider than the state"));
            }
            FVal::State(apply_unitary(u, &st))
        }
        FExpr::Tensor(a, b) => FVal::State(tensor(&state(ev(a)?, "tensor")?, &state(ev(b)?, "tensor")?)),
        FExpr::Cons(c, args) => FVal::Data(c.clone(), args.iter().map(ev).collect::<Result<_, _>>()?),
        FExpr::Call(f, args) => {
            let name = match rho.get(f) {
                Some(FVal::Func(g)) => g.clone(),
                Some(other) => return Err(format!("`{f}` is not a function: {other}")),
                None => f.clone(),
            };
            let cand = defs.candidate(&name).ok_or_else(|| format!("unknown function `{name}`"))?;
            if cand.params.len() != args.len() {
                return Err(format!("`{name}` takes {} arguments, got {}", cand.params.len(), args.len()));
            }
            if depth >= CALL_DEPTH {
                return Err(format!("call depth exceeded in `{name}`"));
            }
            let mut inner = Valuation::new();
            for ((x, _), a) in cand.params.iter().zip(args) {
                inner.insert(x.clone(), ev(a)?);
            }
            eval_in(defs, &inner, &cand.body, depth + 1)?
        }
    })
}

pub fn eval_formula(defs: &Defs, rho: &Valuation, phi: &Formula) -> Result<bool, String> {
    Ok(match phi {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(rel, a, b) => {
            let x = eval_expr(defs, rho, a)?;
            let y = eval_expr(defs, rho, b)?;
            match rel {
                Rel::Eq => x.approx_eq(&y),
                Rel::Ne => !x.approx_eq(&y),
                Rel::Le | Rel::Sqsub => real_le(real(x, "<=")?, real(y, "<=")?),
            }
        }
        Formula::IsCons(c, e) => match eval_expr(defs, rho, e)? {
            FVal::Data(d, _) => &d == c,
            other => return Err(format!("`is` expects constructed data, got {other}")),
        },
        Formula::Not(a) => !eval_formula(defs, rho, a)?,
        Formula::And(a, b) => eval_formula(defs, rho, a)? && eval_formula(defs, rho, b)?,
        Formula::Or(a, b) => eval_formula(defs, rho, a)? || eval_formula(defs, rho, b)?,
        Formula::Implies(a, b) => !eval_formula(defs, rho, a)? || eval_formula(defs, rho, b)?,
        Formula::Forall(x, ty, body) => {
            for v in pool(defs, rho, x, ty, body) {
                let mut r = rho.clone();
                r.insert(x.clone(), v);
                if !eval_formula(defs, &r, body)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Exists(x, ty, body) => {
            for v in pool(defs, rho, x, ty, body) {
                let mut r = rho.clone();
                r.insert(x.clone(), v);
                if eval_formula(defs, &r, body)? {
                    return Ok(true);
                }
            }
            false
        }
    })
}

fn is_cost(ty: &CsType) -> bool {
    matches!(ty, CsType::K | CsType::RInf)
}

fn real_grid(structure: Structure) -> Vec<f64> {
    match structure {
        Structure::RealsPlus => vec![0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 10.0, f64::INFINITY],
        Structure::UnitForgetful => vec![0.0, 0.25, 0.5, 0.75, 1.0],
    }
}

fn fits(defs: &Defs, ty: &CsType, v: &FVal) -> bool {
    match (ty, v) {
        (CsType::K | CsType::RInf, FVal::Real(r)) => *r >= 0.0 && *r <= defs.structure.top(),
        (CsType::Basic(q), FVal::State(_)) => q == "Q",
        (CsType::Basic(b), FVal::Data(c, _)) => defs.decls.cons.get(c).is_some_and(|s| &s.result == b),
        (CsType::Arrow(..), FVal::Func(g)) => defs.candidate(g).is_some_and(|c| &c.skeleton() == ty),
        _ => false,
    }
}

fn collect_exprs<'f>(phi: &'f Formula, out: &mut Vec<&'f FExpr>) {
    fn sub<'f>(e: &'f FExpr, out: &mut Vec<&'f FExpr>) {
        out.push(e);
        for c in e.children() {
            sub(c, out);
        }
    }
    match phi {
        Formula::True | Formula::False => {}
        Formula::Atom(_, a, b) => {
            sub(a, out);
            sub(b, out);
        }
        Formula::IsCons(_, e) => sub(e, out),
        Formula::Not(a) | Formula::Forall(_, _, a) | Formula::Exists(_, _, a) => collect_exprs(a, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_exprs(a, out);
            collect_exprs(b, out);
        }
    }
}

/// Instantiation pool for a quantified variable: a fixed grid for the type
/// plus the values of every subexpression of `body` already evaluable
/// under `rho`.
fn pool(defs: &Defs, rho: &Valuation, x: &str, ty: &CsType, body: &Formula) -> Vec<FVal> {
    let mut out: Vec<FVal> = Vec::new();
    let push = |v: FVal, out: &mut Vec<FVal>| {
        if fits(defs, ty, &v) && !out.iter().any(|w| w == &v) {
            out.push(v);
        }
    };
    match ty {
        CsType::K | CsType::RInf => real_grid(defs.structure).into_iter().for_each(|r| push(FVal::Real(r), &mut out)),
        CsType::Basic(q) if q == "Q" => {
            for bits in ["0", "1"] {
                push(FVal::State(QState::basis(bits).expect("basis state")), &mut out);
            }
        }
        CsType::Basic(b) => {
            for v in small_data(&defs.decls, b, 2) {
                push(v, &mut out);
            }
        }
        CsType::Arrow(..) => {
            for c in &defs.candidates {
                push(FVal::Func(c.name.clone()), &mut out);
            }
        }
    }
    let mut exprs = Vec::new();
    collect_exprs(body, &mut exprs);
    for e in exprs {
        let fv = e.free_vars();
        if fv.contains(x) || !fv.iter().all(|y| rho.contains_key(y) || defs.candidate(y).is_some()) {
            continue;
        }
        if let Ok(v) = eval_expr(defs, rho, e) {
            push(v, &mut out);
        }
    }
    out
}

/// Constructor terms of type `b` up to the given nesting depth.
fn small_data(decls: &Decls, b: &str, depth: usize) -> Vec<FVal> {
    let Some(t) = decls.types.get(b) else { return vec![] };
    let mut out = Vec::new();
    for c in &t.constructors {
        let sig = &decls.cons[c];
        if sig.arity() == 0 {
            out.push(FVal::Data(c.clone(), vec![]));
            continue;
        }
        if depth == 0 {
            continue;
        }
        let mut args: Vec<Vec<FVal>> = vec![vec![]];
        for ty in sig.classical.iter().chain(&sig.quantum) {
            let choices = if ty == "Q" {
                vec![FVal::State(QState::basis("0").expect("basis state"))]
            } else {
                small_data(decls, ty, depth - 1)
            };
            args = args
                .into_iter()
                .flat_map(|prefix| {
                    choices.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v.clone());
                        p
                    })
                })
                .collect();
        }
        out.extend(args.into_iter().map(|a| FVal::Data(c.clone(), a)));
    }
    out
}

/// Oracle knobs. Verdicts are a function of these and the inputs.
#[derive(Debug, Clone, Serialize)]
pub struct OracleConfig {
    pub samples: usize,
    pub seed: u64,
    /// Qubit counts for sampled quantum variables.
    pub qubits: Vec<usize>,
    /// Attempts per sample before a valuation is given up on.
    pub max_tries: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { samples: DEFAULT_SAMPLES, seed: DEFAULT_SEED, qubits: vec![1, 2, 3], max_tries: 100 }
    }
}

fn serialize_display<T: fmt::Display, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

/// A sampled valuation under which a formula evaluates to false.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub seed: u64,
    /// Index of the falsifying sample in the seeded stream.
    pub sample: usize,
    pub valuation: Vec<(String, FVal)>,
    #[serde(serialize_with = "serialize_display")]
    pub formula: Formula,
    /// Values of the leading universal quantifiers that refute the formula.
    pub instance: Vec<(String, FVal)>,
}

impl Witness {
    /// Re-evaluates the formula under the recorded valuation; `true` when
    /// the violation reproduces.
    pub fn replay(&self, defs: &Defs) -> bool {
        let rho: Valuation = self.valuation.iter().cloned().collect();
        matches!(eval_formula(defs, &rho, &self.formula), Ok(false))
    }
}

/// Ordered from weakest to strongest evidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Verdict {
    Falsified(Box<Witness>),
    NotFalsified(usize),
    VerifiedSyntactic,
}

impl Verdict {
    fn rank(&self) -> u8 {
        match self {
            Verdict::Falsified(_) => 0,
            Verdict::NotFalsified(_) => 1,
            Verdict::VerifiedSyntactic => 2,
        }
    }

    /// The weaker of two verdicts.
    pub fn meet(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::NotFalsified(a), Verdict::NotFalsified(b)) => Verdict::NotFalsified(a.min(b)),
            (a, b) => {
                if b.rank() < a.rank() {
                    b
                } else {
                    a
                }
            }
        }
    }

    pub fn is_falsified(&self) -> bool {
        matches!(self, Verdict::Falsified(_))
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::VerifiedSyntactic => f.write_str("VerifiedSyntactic"),
            Verdict::NotFalsified(n) => write!(f, "NotFalsified({n})"),
            Verdict::Falsified(w) => {
                let vals: Vec<String> = w.valuation.iter().chain(&w.instance).map(|(x, v)| format!("{x} = {v}")).collect();
                write!(f, "Falsified(seed {}, sample {}: {})", w.seed, w.sample, vals.join(", "))
            }
        }
    }
}

fn is_reflexive(phi: &Formula) -> bool {
    match phi {
        Formula::True => true,
        Formula::Atom(Rel::Eq | Rel::Le | Rel::Sqsub, a, b) => a == b,
        _ => false,
    }
}

/// Closed under purely structural reasoning: reflexivity, `φ ⇒ φ`,
/// conjunct weakening, and conclusions already assumed by the context.
pub fn syntactically_valid(ctx: &RefContext, phi: &Formula) -> bool {
    let mut body = phi;
    while let Formula::Forall(_, _, b) = body {
        body = b;
    }
    let facts: Vec<&Formula> = ctx
        .entries
        .iter()
        .filter_map(|e| match e {
            CtxEntry::Fact(f) => Some(f),
            _ => None,
        })
        .flat_map(|f| f.conjuncts())
        .collect();
    let known = |c: &Formula, hyps: &[&Formula]| {
        is_reflexive(c)
            || hyps.iter().any(|h| super::formula_alpha_eq(h, c))
            || facts.iter().any(|h| super::formula_alpha_eq(h, c))
    };
    match body {
        Formula::Implies(h, c) => {
            let hyps = h.conjuncts();
            c.conjuncts().iter().all(|g| known(g, &hyps))
        }
        _ => body.conjuncts().iter().all(|g| known(g, &[])),
    }
}

/// Defining equation `x = e` (either orientation) with `x ∉ fv(e)`.
fn defining_eq(x: &str, phi: &Formula) -> Option<FExpr> {
    match phi {
        Formula::Atom(Rel::Eq, FExpr::Var(y), e) | Formula::Atom(Rel::Eq, e, FExpr::Var(y))
            if y == x && !e.free_vars().contains(x) =>
        {
            Some(e.clone())
        }
        _ => None,
    }
}

struct Norm {
    used: BTreeSet<String>,
}

impl Norm {
    fn fresh(&mut self, base: &str) -> String {
        let n = fresh_name(base, &self.used);
        self.used.insert(n.clone());
        n
    }

    fn norm(&mut self, phi: &Formula) -> Formula {
        match phi {
            Formula::Not(a) => Formula::not(self.norm(a)),
            Formula::Or(a, b) => Formula::Or(Box::new(self.norm(a)), Box::new(self.norm(b))),
            Formula::And(a, b) => {
                let parts: Vec<Formula> = vec![self.norm(a), self.norm(b)];
                self.lift_exists(parts)
            }
            Formula::Exists(..) => {
                let (binders, matrix) = self.open_exists(phi);
                let matrix = self.norm(&matrix);
                // the normalized matrix may expose further existentials
                let (more, matrix) = self.open_exists(&matrix);
                let mut binders = binders;
                binders.extend(more);
                let (binders, parts) = eliminate(binders, matrix.conjuncts().into_iter().cloned().collect());
                binders
                    .into_iter()
                    .rev()
                    .fold(Formula::conj(parts), |acc, (x, ty)| Formula::exists(&x, ty, acc))
            }
            Formula::Implies(a, b) => {
                let a = self.norm(a);
                let b = self.norm(b);
                if matches!(a, Formula::Exists(..)) {
                    let (binders, matrix) = self.open_exists(&a);
                    let body = Formula::implies(matrix, b);
                    let quantified =
                        binders.into_iter().rev().fold(body, |acc, (x, ty)| Formula::forall(&x, ty, acc));
                    self.norm_forall(&quantified)
                } else {
                    Formula::implies(a, b)
                }
            }
            Formula::Forall(x, ty, body) => {
                let inner = self.norm(body);
                self.norm_forall(&Formula::forall(x, ty.clone(), inner))
            }
            _ => phi.clone(),
        }
    }

    /// One-point elimination under a block of universals over an implication.
    fn norm_forall(&mut self, phi: &Formula) -> Formula {
        let mut binders = Vec::new();
        let mut body = phi.clone();
        while let Formula::Forall(x, ty, b) = body {
            binders.push((x, ty));
            body = *b;
        }
        let Formula::Implies(h, c) = body else {
            return binders.into_iter().rev().fold(body, |acc, (x, ty)| Formula::forall(&x, ty, acc));
        };
        let mut parts: Vec<Formula> = h.conjuncts().into_iter().cloned().collect();
        let mut concl = *c;
        let mut kept = Vec::new();
        for (x, ty) in binders {
            if let Some(i) = parts.iter().position(|p| defining_eq(&x, p).is_some()) {
                let e = defining_eq(&x, &parts.remove(i)).expect("found above");
                parts = parts.iter().map(|p| p.subst(&x, &e)).collect();
                concl = concl.subst(&x, &e);
            } else {
                kept.push((x, ty));
            }
        }
        let body = if parts.is_empty() { concl } else { Formula::implies(Formula::conj(parts), concl) };
        kept.into_iter().rev().fold(body, |acc, (x, ty)| Formula::forall(&x, ty, acc))
    }

    /// Splits a block of existentials, renaming binders apart from every
    /// name seen so far.
    fn open_exists(&mut self, phi: &Formula) -> (Vec<(String, CsType)>, Formula) {
        let mut binders = Vec::new();
        let mut body = phi.clone();
        while let Formula::Exists(x, ty, b) = body {
            let fresh = self.fresh(&x);
            body = b.subst(&x, &FExpr::Var(fresh.clone()));
            binders.push((fresh, ty));
        }
        (binders, body)
    }

    /// `(∃x.φ) ∧ ψ` becomes `∃x.(φ ∧ ψ)`.
    fn lift_exists(&mut self, parts: Vec<Formula>) -> Formula {
        let mut binders = Vec::new();
        let mut flat = Vec::new();
        for p in parts {
            let (bs, m) = self.open_exists(&p);
            binders.extend(bs);
            flat.extend(m.conjuncts().into_iter().cloned());
        }
        let matrix = Formula::conj(flat);
        if binders.is_empty() {
            return matrix;
        }
        let quantified = binders.into_iter().rev().fold(matrix, |acc, (x, ty)| Formula::exists(&x, ty, acc));
        self.norm(&quantified)
    }
}

fn eliminate(binders: Vec<(String, CsType)>, mut parts: Vec<Formula>) -> (Vec<(String, CsType)>, Vec<Formula>) {
    let mut kept = Vec::new();
    for (x, ty) in binders {
        if let Some(i) = parts.iter().position(|p| defining_eq(&x, p).is_some()) {
            let e = defining_eq(&x, &parts.remove(i)).expect("found above");
            parts = parts.iter().map(|p| p.subst(&x, &e)).collect();
        } else {
            kept.push((x, ty));
        }
    }
    (kept, parts)
}

/// Pulls existentials out of hypotheses and eliminates quantified variables
/// that have a defining equation. The result is equivalent to the input.
pub fn normalize(phi: &Formula) -> Formula {
    let mut used = BTreeSet::new();
    phi.all_vars(&mut used);
    Norm { used }.norm(phi)
}

fn random_real(structure: Structure, rng: &mut ChaCha8Rng) -> f64 {
    let grid = real_grid(structure);
    match structure {
        Structure::RealsPlus => {
            if rng.gen_bool(0.3) {
                *grid[..grid.len() - 1].choose(rng).expect("nonempty grid")
            } else {
                -rng.gen::<f64>().max(1e-300).ln() * 2.0
            }
        }
        Structure::UnitForgetful => {
            if rng.gen_bool(0.3) {
                *grid.choose(rng).expect("nonempty grid")
            } else {
                rng.gen::<f64>()
            }
        }
    }
}

fn random_data(decls: &Decls, b: &str, cfg: &OracleConfig, rng: &mut ChaCha8Rng, depth: usize) -> Option<FVal> {
    let t = decls.types.get(b)?;
    let cons: Vec<&String> = if depth > 24 {
        t.constructors.iter().filter(|c| decls.cons[*c].arity() == 0).collect()
    } else {
        t.constructors.iter().collect()
    };
    let c = (*cons.choose(rng)?).clone();
    let sig = &decls.cons[&c];
    let mut args = Vec::new();
    for ty in sig.classical.iter().chain(&sig.quantum) {
        args.push(random_value(decls, &CsType::Basic(ty.clone()), cfg, rng, depth + 1, Structure::RealsPlus)?);
    }
    Some(FVal::Data(c, args))
}

fn random_value(
    decls: &Decls,
    ty: &CsType,
    cfg: &OracleConfig,
    rng: &mut ChaCha8Rng,
    depth: usize,
    structure: Structure,
) -> Option<FVal> {
    match ty {
        CsType::K | CsType::RInf => Some(FVal::Real(random_real(structure, rng))),
        CsType::Basic(q) if q == "Q" => {
            let n = *cfg.qubits.choose(rng)?;
            Some(FVal::State(QState::random(n, rng)))
        }
        CsType::Basic(b) => random_data(decls, b, cfg, rng, depth),
        CsType::Arrow(..) => None,
    }
}

/// Candidate value for `z : {I | φ}` given the valuation so far.
fn propose(defs: &Defs, rho: &Valuation, z: &str, base: &CsType, phi: &Formula, cfg: &OracleConfig, rng: &mut ChaCha8Rng) -> Option<FVal> {
    let parts = phi.conjuncts();
    for p in &parts {
        if let Some(e) = defining_eq(z, p) {
            if let Ok(v) = eval_expr(defs, rho, &e) {
                return Some(v);
            }
        }
    }
    if is_cost(base) {
        for p in &parts {
            if let Formula::Atom(Rel::Le | Rel::Sqsub, FExpr::Var(y), e) = p {
                if y == z && !e.free_vars().contains(z) {
                    if let Ok(FVal::Real(bound)) = eval_expr(defs, rho, e) {
                        if rng.gen_bool(0.25) || !bound.is_finite() {
                            return Some(FVal::Real(bound.min(defs.structure.top())));
                        }
                        return Some(FVal::Real(rng.gen::<f64>() * bound.max(0.0)));
                    }
                }
            }
        }
    }
    random_value(&defs.decls, base, cfg, rng, 0, defs.structure)
}

fn sample_once(defs: &Defs, ctx: &RefContext, needed: &BTreeSet<String>, cfg: &OracleConfig, rng: &mut ChaCha8Rng) -> Option<Valuation> {
    let mut rho = Valuation::new();
    for entry in &ctx.entries {
        match entry {
            CtxEntry::Bind(x, RefType::Base { base, z, phi }) => {
                let mut found = None;
                for _ in 0..20 {
                    let v = propose(defs, &rho, z, base, phi, cfg, rng)?;
                    let mut r = rho.clone();
                    r.insert(z.clone(), v.clone());
                    if fits(defs, base, &v) && eval_formula(defs, &r, phi).unwrap_or(false) {
                        found = Some(v);
                        break;
                    }
                }
                rho.insert(x.clone(), found?);
            }
            CtxEntry::Bind(x, t) => {
                if !needed.contains(x) {
                    continue;
                }
                let sk = t.skeleton();
                let pool: Vec<&super::Candidate> = defs.candidates.iter().filter(|c| c.skeleton() == sk).collect();
                let c = pool.choose(rng)?;
                rho.insert(x.clone(), FVal::Func(c.name.clone()));
            }
            CtxEntry::Fact(phi) => {
                if !eval_formula(defs, &rho, phi).unwrap_or(false) {
                    return None;
                }
            }
        }
    }
    Some(rho)
}

fn needed_vars(ctx: &RefContext, phi: &Formula) -> BTreeSet<String> {
    let mut out = phi.free_vars();
    for e in &ctx.entries {
        match e {
            CtxEntry::Fact(f) => out.extend(f.free_vars()),
            CtxEntry::Bind(_, t) => out.extend(t.free_vars()),
        }
    }
    out
}

/// One valuation adhering to `ctx`, or `None` if rejection sampling gave up.
pub fn sample_context(defs: &Defs, ctx: &RefContext, phi: &Formula, cfg: &OracleConfig, rng: &mut ChaCha8Rng) -> Option<Valuation> {
    let needed = needed_vars(ctx, phi);
    (0..cfg.max_tries.max(1)).find_map(|_| sample_once(defs, ctx, &needed, cfg, rng))
}

fn refuting_instance(defs: &Defs, rho: &Valuation, phi: &Formula) -> Vec<(String, FVal)> {
    let mut out = Vec::new();
    let mut rho = rho.clone();
    let mut cur = phi;
    while let Formula::Forall(x, ty, body) = cur {
        let Some(v) = pool(defs, &rho, x, ty, body).into_iter().find(|v| {
            let mut r = rho.clone();
            r.insert(x.clone(), v.clone());
            matches!(eval_formula(defs, &r, body), Ok(false))
        }) else {
            break;
        };
        rho.insert(x.clone(), v.clone());
        out.push((x.clone(), v));
        cur = body;
    }
    out
}

/// `ctx ⊨ φ`, three-valued. Samples on which the formula cannot be
/// evaluated (for instance a gate wider than the sampled state) are not
/// counted.
pub fn validity(defs: &Defs, ctx: &RefContext, phi: &Formula, cfg: &OracleConfig) -> Verdict {
    if syntactically_valid(ctx, phi) {
        return Verdict::VerifiedSyntactic;
    }
    let phi = normalize(phi);
    if syntactically_valid(ctx, &phi) {
        return Verdict::VerifiedSyntactic;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let needed = needed_vars(ctx, &phi);
    let mut ok = 0;
    for i in 0..cfg.samples {
        let Some(rho) = (0..cfg.max_tries.max(1)).find_map(|_| sample_once(defs, ctx, &needed, cfg, &mut rng)) else {
            continue;
        };
        match eval_formula(defs, &rho, &phi) {
            Ok(true) => ok += 1,
            Ok(false) => {
                return Verdict::Falsified(Box::new(Witness {
                    seed: cfg.seed,
                    sample: i,
                    instance: refuting_instance(defs, &rho, &phi),
                    valuation: rho.into_iter().collect(),
                    formula: phi,
                }));
            }
            Err(_) => {}
        }
    }
    Verdict::NotFalsified(ok)
}
