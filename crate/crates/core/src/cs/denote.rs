//! Denotations of cost-structure terms over a chosen cost structure.
//!
//! Recursive definitions are unrolled lazily: a `letrec` closure carries
//! fuel, and applying it with no fuel left yields ⊥. With fuel `n` the
//! closure is exactly the `n`-th Kleene iterate, so every result is an
//! under-approximation of the least fixed point. Cost values carry the
//! probability weight that reached ⊥ (the *residual*), which tells an exact
//! result from one that is still converging.

use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::cost::{CostError, CostStructure, ExtReal};
use crate::decls::Decls;
use crate::linalg::{apply_unitary, measure_prob, post_measure, tensor, QState};
use crate::syntax::fmt_ket;

use super::{cs_pretty, CsLetrec, CsTerm};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DenoteError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("ill-typed denotation: expected {expected}, found {found}")]
    Dynamic { expected: &'static str, found: String },
    #[error("no arm matches `{0}`")]
    NoMatchingArm(String),
    #[error(transparent)]
    Cost(#[from] CostError),
}

#[derive(Clone)]
pub enum Den<'a, E> {
    Base(String, Vec<Den<'a, E>>),
    Quantum(QState<f64>),
    Real(ExtReal<f64>),
    /// Cost element and the weight of ⊥ folded into it.
    Cost(E, f64),
    Func(Rc<Closure<'a, E>>),
    /// ⊥ of a pointed (functional) type.
    Bottom,
}

pub enum Closure<'a, E> {
    Lam { param: &'a str, body: &'a CsTerm, env: Env<'a, E> },
    Rec { lr: &'a CsLetrec, env: Env<'a, E>, fuel: usize },
}

impl<E: fmt::Debug> fmt::Debug for Den<'_, E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Den::Base(c, args) => {
                f.write_str(c)?;
                if !args.is_empty() {
                    f.write_str("(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            f.write_str(", ")?;
                        }
                        write!(f, "{a:?}")?;
                    }
                    f.write_str(")")?;
                }
                Ok(())
            }
            Den::Quantum(q) => f.write_str(&fmt_ket(q)),
            Den::Real(r) => write!(f, "{r}"),
            Den::Cost(e, res) if *res > 0.0 => write!(f, "{e:?} (residual {res:e})"),
            Den::Cost(e, _) => write!(f, "{e:?}"),
            Den::Func(c) => match &**c {
                Closure::Lam { param, .. } => write!(f, "<fun {param}>"),
                Closure::Rec { lr, fuel, .. } => write!(f, "<rec {} fuel {fuel}>", lr.fun),
            },
            Den::Bottom => f.write_str("⊥"),
        }
    }
}

impl<'a, E> Den<'a, E> {
    pub fn kind(&self) -> &'static str {
        match self {
            Den::Base(..) => "constructor value",
            Den::Quantum(_) => "quantum state",
            Den::Real(_) => "real",
            Den::Cost(..) => "cost",
            Den::Func(_) => "function",
            Den::Bottom => "bottom",
        }
    }
}

/// Immutable valuation: a persistent list of bindings.
pub struct Env<'a, E>(Option<Rc<(String, Den<'a, E>, Env<'a, E>)>>);

impl<E> Clone for Env<'_, E> {
    fn clone(&self) -> Self {
        Env(self.0.clone())
    }
}

impl<'a, E> Default for Env<'a, E> {
    fn default() -> Self {
        Env(None)
    }
}

impl<'a, E: Clone> Env<'a, E> {
    pub fn empty() -> Self {
        Env(None)
    }

    pub fn bind(&self, x: &str, v: Den<'a, E>) -> Self {
        Env(Some(Rc::new((x.to_string(), v, self.clone()))))
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, Den<'a, E>)>) -> Self {
        pairs.into_iter().fold(Env::empty(), |env, (x, v)| env.bind(&x, v))
    }

    pub fn lookup(&self, x: &str) -> Option<&Den<'a, E>> {
        let mut cur = &self.0;
        while let Some(node) = cur {
            if node.0 == x {
                return Some(&node.1);
            }
            cur = &node.2 .0;
        }
        None
    }
}

/// Evaluation state for one unrolling budget.
pub struct Denoter<'c, K: CostStructure<Scalar = f64>> {
    pub cs: &'c K,
    pub decls: &'c Decls,
    pub budget: usize,
    /// Some `letrec` ran out of fuel.
    pub exhausted: bool,
    /// Residual weight lost when costs were read back as reals.
    extra_residual: f64,
}

fn dynamic<E>(expected: &'static str, found: &Den<'_, E>) -> DenoteError {
    DenoteError::Dynamic { expected, found: found.kind().into() }
}

impl<'c, K: CostStructure<Scalar = f64>> Denoter<'c, K> {
    pub fn new(cs: &'c K, decls: &'c Decls, budget: usize) -> Self {
        Denoter { cs, decls, budget, exhausted: false, extra_residual: 0.0 }
    }

    pub fn extra_residual(&self) -> f64 {
        self.extra_residual
    }

    pub fn eval<'a>(&mut self, t: &'a CsTerm, env: &Env<'a, K::Elem>) -> Result<Den<'a, K::Elem>, DenoteError> {
        stacker::maybe_grow(64 * 1024, 4 * 1024 * 1024, || self.eval_inner(t, env))
    }

    fn eval_inner<'a>(&mut self, t: &'a CsTerm, env: &Env<'a, K::Elem>) -> Result<Den<'a, K::Elem>, DenoteError> {
        match t {
            CsTerm::Var(x) => env.lookup(x).cloned().ok_or_else(|| DenoteError::UnboundVariable(x.clone())),
            CsTerm::Lam(x, body) => Ok(Den::Func(Rc::new(Closure::Lam { param: x, body, env: env.clone() }))),
            CsTerm::App(f, v) => {
                let fv = self.eval(f, env)?;
                let av = self.eval(v, env)?;
                self.apply(fv, av)
            }
            CsTerm::Ket(k) => Ok(Den::Quantum(k.clone())),
            CsTerm::Gate(g, v) => {
                let psi = self.quantum(v, env)?;
                let u = self.decls.gates.get(g).ok_or_else(|| DenoteError::UnboundVariable(g.clone()))?;
                Ok(Den::Quantum(apply_unitary(u, &psi)))
            }
            CsTerm::Tensor(a, b) => {
                let pa = self.quantum(a, env)?;
                let pb = self.quantum(b, env)?;
                Ok(Den::Quantum(tensor(&pa, &pb)))
            }
            CsTerm::Collapse(b, v) => {
                let psi = self.quantum(v, env)?;
                Ok(Den::Quantum(post_measure(*b, &psi)))
            }
            CsTerm::Cons(c, vs) => {
                let args = vs.iter().map(|v| self.eval(v, env)).collect::<Result<Vec<_>, _>>()?;
                Ok(Den::Base(c.clone(), args))
            }
            CsTerm::Case(s, arms, def) => {
                let sv = self.eval(s, env)?;
                if let Den::Base(c, args) = &sv {
                    if let Some(arm) = arms.iter().find(|a| &a.cons == c) {
                        let inner = arm.params.iter().zip(args).fold(env.clone(), |e, (x, v)| e.bind(x, v.clone()));
                        return self.eval(&arm.body, &inner);
                    }
                }
                match def {
                    Some((y, body)) => self.eval(body, &env.bind(y, sv)),
                    None => Err(DenoteError::NoMatchingArm(cs_pretty(s))),
                }
            }
            CsTerm::Letrec(lr) => Ok(Den::Func(Rc::new(Closure::Rec { lr, env: env.clone(), fuel: self.budget }))),
            CsTerm::Real(r) => Ok(Den::Real(ExtReal::Finite(*r))),
            CsTerm::CAdd(a, b) => {
                let r = self.eval(a, env)?;
                let r = self.as_real(&r)?;
                let k = self.eval(b, env)?;
                let (k, res) = self.as_cost(&k)?;
                Ok(Den::Cost(self.cs.cadd(&r, &k), res))
            }
            CsTerm::Bary(a, v, b) => {
                let psi = self.quantum(v, env)?;
                let p = measure_prob(0, &psi);
                // a side of weight exactly zero is never evaluated
                if p >= 1.0 {
                    let d = self.eval(a, env)?;
                    let (x, r) = self.as_cost(&d)?;
                    return Ok(Den::Cost(x, r));
                }
                if p <= 0.0 {
                    let d = self.eval(b, env)?;
                    let (x, r) = self.as_cost(&d)?;
                    return Ok(Den::Cost(x, r));
                }
                let da = self.eval(a, env)?;
                let (x, rx) = self.as_cost(&da)?;
                let db = self.eval(b, env)?;
                let (y, ry) = self.as_cost(&db)?;
                Ok(Den::Cost(self.cs.bary(&p, &x, &y), p * rx + (1.0 - p) * ry))
            }
        }
    }

    pub fn apply<'a>(&mut self, f: Den<'a, K::Elem>, a: Den<'a, K::Elem>) -> Result<Den<'a, K::Elem>, DenoteError> {
        match f {
            Den::Func(c) => match &*c {
                Closure::Lam { param, body, env } => self.eval(body, &env.bind(param, a)),
                Closure::Rec { lr, env, fuel } => {
                    if *fuel == 0 {
                        self.exhausted = true;
                        return Ok(Den::Bottom);
                    }
                    let me = Den::Func(Rc::new(Closure::Rec { lr, env: env.clone(), fuel: fuel - 1 }));
                    let inner = env.bind(&lr.fun, me).bind(&lr.param, a);
                    self.eval(&lr.body, &inner)
                }
            },
            Den::Bottom => Ok(Den::Bottom),
            other => Err(dynamic("function", &other)),
        }
    }

    fn quantum<'a>(&mut self, v: &'a CsTerm, env: &Env<'a, K::Elem>) -> Result<QState<f64>, DenoteError> {
        match self.eval(v, env)? {
            Den::Quantum(q) => Ok(q),
            other => Err(dynamic("quantum state", &other)),
        }
    }

    /// Reads a denotation as an element of the cost structure.
    pub fn as_cost(&self, d: &Den<'_, K::Elem>) -> Result<(K::Elem, f64), DenoteError> {
        match d {
            Den::Cost(e, r) => Ok((e.clone(), *r)),
            Den::Bottom => Ok((self.cs.bottom(), 1.0)),
            Den::Real(x) => Ok((self.cs.from_real(x)?, 0.0)),
            other => Err(dynamic("cost", other)),
        }
    }

    /// Reads a denotation as an extended real.
    pub fn as_real(&mut self, d: &Den<'_, K::Elem>) -> Result<ExtReal<f64>, DenoteError> {
        match d {
            Den::Real(x) => Ok(x.clone()),
            Den::Cost(e, r) => {
                self.extra_residual += r;
                Ok(self.cs.to_real(e))
            }
            Den::Bottom => {
                self.extra_residual += 1.0;
                Ok(ExtReal::zero())
            }
            other => Err(dynamic("real", other)),
        }
    }
}

/// Result of evaluating at one budget.
pub struct Denoted<'a, E> {
    pub value: Den<'a, E>,
    pub exhausted: bool,
    pub extra_residual: f64,
}

/// `⟦T⟧ρ` with every `letrec` unrolled at most `budget` times.
pub fn denote<'a, K: CostStructure<Scalar = f64>>(
    cs: &K,
    decls: &Decls,
    t: &'a CsTerm,
    env: &Env<'a, K::Elem>,
    budget: usize,
) -> Result<Denoted<'a, K::Elem>, DenoteError> {
    let mut d = Denoter::new(cs, decls, budget);
    let value = d.eval(t, env)?;
    Ok(Denoted { value, exhausted: d.exhausted, extra_residual: d.extra_residual })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedCost<E> {
    pub value: E,
    /// Weight that had not reached a result at the final budget.
    pub residual: f64,
    pub converged: bool,
    /// No `letrec` ran out of fuel: the value is the exact denotation.
    pub exact: bool,
    pub budget: usize,
}

/// Budgets tried by [`denote_closed_cost`]: 1, 2, 4, … capped at `max`.
pub fn budget_schedule(max: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut b = 1usize;
    while b < max {
        out.push(b);
        b *= 2;
    }
    out.push(max.max(1));
    out
}

/// Iterative deepening for a term of type `K` (or `R+inf` identified with
/// it). Converged when exact, or when two successive budgets agree within
/// `tol` and the residual is below `tol`; otherwise the last value is a
/// lower bound.
pub fn denote_closed_cost<'a, K: CostStructure<Scalar = f64>>(
    cs: &K,
    decls: &Decls,
    t: &'a CsTerm,
    env: &Env<'a, K::Elem>,
    max_budget: usize,
    tol: f64,
) -> Result<ClosedCost<K::Elem>, DenoteError> {
    let mut prev: Option<K::Elem> = None;
    let mut last = None;
    for b in budget_schedule(max_budget) {
        let mut d = Denoter::new(cs, decls, b);
        let v = d.eval(t, env)?;
        let (x, r) = d.as_cost(&v)?;
        let residual = (r + d.extra_residual).min(1.0);
        if !d.exhausted {
            return Ok(ClosedCost { value: x, residual: 0.0, converged: true, exact: true, budget: b });
        }
        let close = prev.as_ref().is_some_and(|p| cs.distance(p, &x) < tol);
        if close && residual < tol {
            return Ok(ClosedCost { value: x, residual, converged: true, exact: false, budget: b });
        }
        prev = Some(x.clone());
        last = Some(ClosedCost { value: x, residual, converged: false, exact: false, budget: b });
    }
    Ok(last.expect("schedule is nonempty"))
}
