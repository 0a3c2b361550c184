//! The quantum expectation transformer: a continuation-passing translation
//! from source terms to cost-structure terms of type `K`.
//!
//! Source variable `x` becomes `X` (first letter capitalised). Generated
//! binders use `V0, V1, …` and continuations `K0, K1, …`, skipping every
//! name that occurs in the input. Case-arm binders are renamed when they
//! would capture a free variable of the continuation placed under them.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::cs::{CsArm, CsLetrec, CsTerm, CsType};
use crate::source::{SType, Term};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QetError {
    #[error("not a value: {0}")]
    NotAValue(String),
}

/// `𝒯(T)`.
pub fn translate_type(t: &SType) -> CsType {
    match t {
        SType::Basic(b) => CsType::Basic(b.clone()),
        SType::Lin(a, b) | SType::Exp(a, b) => CsType::arrow(
            translate_type(a),
            CsType::arrow(CsType::arrow(translate_type(b), CsType::K), CsType::K),
        ),
    }
}

/// Cost-structure name of a source variable.
pub fn cs_var(x: &str) -> String {
    let mut cs = x.chars();
    match cs.next() {
        Some(c) if c.is_lowercase() => c.to_uppercase().chain(cs).collect(),
        _ => x.to_string(),
    }
}

/// `λZ. real 0`, the continuation whose translation yields expected cost.
pub fn zero_continuation() -> CsTerm {
    CsTerm::lam("Z", CsTerm::Real(0.0))
}

pub struct Qet {
    taken: BTreeSet<String>,
    next_v: usize,
    next_k: usize,
    /// Source binder → CS name, innermost last.
    scope: Vec<(String, String)>,
}

impl Qet {
    /// A translator whose fresh names avoid everything in `source` and `ks`.
    pub fn new(source: &Term, ks: &[&CsTerm]) -> Self {
        let mut taken = BTreeSet::new();
        collect_source_names(source, &mut taken);
        for k in ks {
            k.all_vars(&mut taken);
        }
        Qet { taken, next_v: 0, next_k: 0, scope: Vec::new() }
    }

    fn fresh(&mut self, prefix: char) -> String {
        loop {
            let n = if prefix == 'K' { &mut self.next_k } else { &mut self.next_v };
            let name = format!("{prefix}{n}");
            *n += 1;
            if !self.taken.contains(&name) {
                self.taken.insert(name.clone());
                return name;
            }
        }
    }

    fn lookup(&self, x: &str) -> String {
        self.scope.iter().rev().find(|(s, _)| s == x).map(|(_, c)| c.clone()).unwrap_or_else(|| cs_var(x))
    }

    fn with_scope<R>(&mut self, binds: Vec<(String, String)>, f: impl FnOnce(&mut Self) -> R) -> R {
        let n = self.scope.len();
        self.scope.extend(binds);
        let r = f(self);
        self.scope.truncate(n);
        r
    }

    /// `𝒱(v)`.
    pub fn value(&mut self, v: &Term) -> Result<CsTerm, QetError> {
        match v {
            Term::Var(x) => Ok(CsTerm::Var(self.lookup(x))),
            Term::Ket(k) => Ok(CsTerm::Ket(k.clone())),
            Term::Lam(x, body) => {
                let k = self.fresh('K');
                let cx = cs_var(x);
                let inner = self.with_scope(vec![(x.clone(), cx.clone())], |q| q.term(body, &CsTerm::Var(k.clone())))?;
                Ok(CsTerm::lam(&cx, CsTerm::lam(&k, inner)))
            }
            Term::Letrec(l) => {
                let k = self.fresh('K');
                let (cf, cx) = (cs_var(&l.fun), cs_var(&l.param));
                let binds = vec![(l.fun.clone(), cf.clone()), (l.param.clone(), cx.clone())];
                let inner = self.with_scope(binds, |q| q.term(&l.body, &CsTerm::Var(k.clone())))?;
                Ok(CsTerm::Letrec(Box::new(CsLetrec {
                    fun: cf,
                    param: cx,
                    ann: l.ann.as_ref().map(translate_type),
                    body: CsTerm::lam(&k, inner),
                })))
            }
            Term::Cons(c, cl, qu) => {
                let args = cl.iter().chain(qu).map(|a| self.value(a)).collect::<Result<Vec<_>, _>>()?;
                Ok(CsTerm::Cons(c.clone(), args))
            }
            other => Err(QetError::NotAValue(crate::source::pretty(other))),
        }
    }

    /// `qet[t]{K}`; `k` must be a cost-structure value.
    pub fn term(&mut self, t: &Term, k: &CsTerm) -> Result<CsTerm, QetError> {
        if t.is_value() {
            return Ok(CsTerm::app(k.clone(), self.value(t)?));
        }
        match t {
            Term::App(t0, t1) => {
                let (x0, x1) = (self.fresh('V'), self.fresh('V'));
                let call = CsTerm::app(CsTerm::app(CsTerm::var(&x0), CsTerm::var(&x1)), k.clone());
                let inner = self.term(t0, &CsTerm::lam(&x0, call))?;
                self.term(t1, &CsTerm::lam(&x1, inner))
            }
            Term::Gate(g, a) => {
                let x = self.fresh('V');
                let body = CsTerm::app(k.clone(), CsTerm::Gate(g.clone(), Box::new(CsTerm::var(&x))));
                self.term(a, &CsTerm::lam(&x, body))
            }
            Term::Meas(a) => {
                let x = self.fresh('V');
                let branch = |b: u8| {
                    let inj = if b == 0 { "inj0" } else { "inj1" };
                    CsTerm::app(k.clone(), CsTerm::Cons(inj.into(), vec![CsTerm::Collapse(b, Box::new(CsTerm::var(&x)))]))
                };
                let body = CsTerm::bary(branch(0), CsTerm::var(&x), branch(1));
                self.term(a, &CsTerm::lam(&x, body))
            }
            Term::Tensor(t0, t1) => {
                let (x0, x1) = (self.fresh('V'), self.fresh('V'));
                let body = CsTerm::app(k.clone(), CsTerm::Tensor(Box::new(CsTerm::var(&x0)), Box::new(CsTerm::var(&x1))));
                let inner = self.term(t0, &CsTerm::lam(&x0, body))?;
                self.term(t1, &CsTerm::lam(&x1, inner))
            }
            Term::Cons(c, cl, qu) => {
                let args: Vec<&Term> = cl.iter().chain(qu).collect();
                let names: Vec<String> = args.iter().map(|_| self.fresh('V')).collect();
                let mut acc = CsTerm::app(k.clone(), CsTerm::Cons(c.clone(), names.iter().map(|n| CsTerm::var(n)).collect()));
                // evaluation is right to left within each group, quantum first;
                // so the classical group's leftmost argument is the innermost
                let order: Vec<usize> = (cl.len()..args.len()).rev().chain((0..cl.len()).rev()).collect();
                for &i in order.iter().rev() {
                    acc = self.term(args[i], &CsTerm::lam(&names[i], acc))?;
                }
                Ok(acc)
            }
            Term::Case(s, arms, def) => {
                let x = self.fresh('V');
                let kfv = k.free_vars();
                let mut cs_arms = Vec::with_capacity(arms.len());
                for arm in arms {
                    let binders: Vec<&String> = arm.classical.iter().chain(&arm.quantum).collect();
                    let binds: Vec<(String, String)> = binders.iter().map(|b| ((*b).clone(), self.binder_name(b, &kfv))).collect();
                    let params = binds.iter().map(|(_, c)| c.clone()).collect();
                    let body = self.with_scope(binds, |q| q.term(&arm.body, k))?;
                    cs_arms.push(CsArm { cons: arm.cons.clone(), params, body });
                }
                let cs_def = match def {
                    Some((y, body)) => {
                        let cy = self.binder_name(y, &kfv);
                        let body = self.with_scope(vec![(y.clone(), cy.clone())], |q| q.term(body, k))?;
                        Some((cy, Box::new(body)))
                    }
                    None => None,
                };
                let body = CsTerm::Case(Box::new(CsTerm::var(&x)), cs_arms, cs_def);
                self.term(s, &CsTerm::lam(&x, body))
            }
            Term::Tick(a) => Ok(CsTerm::cadd(CsTerm::Real(1.0), self.term(a, k)?)),
            Term::Var(_) | Term::Lam(..) | Term::Ket(_) | Term::Letrec(_) => unreachable!("values handled above"),
        }
    }

    fn binder_name(&mut self, x: &str, avoid: &BTreeSet<String>) -> String {
        let c = cs_var(x);
        if avoid.contains(&c) {
            self.fresh('V')
        } else {
            c
        }
    }
}

fn collect_source_names(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Var(x) => {
            out.insert(cs_var(x));
        }
        Term::Lam(x, b) => {
            out.insert(cs_var(x));
            collect_source_names(b, out);
        }
        Term::App(a, b) | Term::Tensor(a, b) => {
            collect_source_names(a, out);
            collect_source_names(b, out);
        }
        Term::Ket(_) => {}
        Term::Gate(_, a) | Term::Meas(a) | Term::Tick(a) => collect_source_names(a, out),
        Term::Cons(_, cl, qu) => cl.iter().chain(qu).for_each(|a| collect_source_names(a, out)),
        Term::Case(s, arms, def) => {
            collect_source_names(s, out);
            for arm in arms {
                out.extend(arm.classical.iter().chain(&arm.quantum).map(|x| cs_var(x)));
                collect_source_names(&arm.body, out);
            }
            if let Some((y, b)) = def {
                out.insert(cs_var(y));
                collect_source_names(b, out);
            }
        }
        Term::Letrec(l) => {
            out.insert(cs_var(&l.fun));
            out.insert(cs_var(&l.param));
            collect_source_names(&l.body, out);
        }
    }
}

pub fn translate_value(v: &Term) -> Result<CsTerm, QetError> {
    Qet::new(v, &[]).value(v)
}

pub fn translate_term(t: &Term, k: &CsTerm) -> Result<CsTerm, QetError> {
    Qet::new(t, &[k]).term(t, k)
}
