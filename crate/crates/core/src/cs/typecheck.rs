//! Simple types for cost-structure terms.
//!
//! Lambdas carry no annotations, so checking is first-order unification.
//! Recursion is admitted only at functional types `K | S => F`; that
//! restriction is enforced once all constraints are solved.

use serde::Serialize;
use thiserror::Error;

use crate::decls::Decls;

use super::{cs_pretty, CsTerm, CsType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CsTypeErrorKind {
    NotFunctionalType,
    OperandNotValue,
    TypeMismatch,
    UnboundVariable,
    UnknownConstructor,
    UnknownGate,
    ArityMismatch,
    NonExhaustive,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("{kind:?}: {msg}")]
pub struct CsTypeError {
    pub kind: CsTypeErrorKind,
    pub msg: String,
    pub term: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CsTypeOptions {
    /// Identify `K` with `R+inf`, for cost structures whose carrier is the
    /// extended reals (or embeds them).
    pub k_is_real: bool,
}

#[derive(Debug, Clone, PartialEq)]
enum Ty {
    Basic(String),
    RInf,
    K,
    Arrow(Box<Ty>, Box<Ty>),
    Meta(usize),
}

struct Infer<'d> {
    decls: &'d Decls,
    opts: CsTypeOptions,
    metas: Vec<Option<Ty>>,
    /// Letrec types to validate once solved, with the printed binder.
    recs: Vec<(Ty, String)>,
}

fn err(kind: CsTypeErrorKind, msg: impl Into<String>, t: Option<&CsTerm>) -> CsTypeError {
    CsTypeError { kind, msg: msg.into(), term: t.map(cs_pretty) }
}

impl<'d> Infer<'d> {
    fn from_cs(&self, t: &CsType) -> Ty {
        match t {
            CsType::Basic(b) => Ty::Basic(b.clone()),
            CsType::RInf if self.opts.k_is_real => Ty::K,
            CsType::RInf => Ty::RInf,
            CsType::K => Ty::K,
            CsType::Arrow(a, b) => Ty::Arrow(Box::new(self.from_cs(a)), Box::new(self.from_cs(b))),
        }
    }

    fn fresh(&mut self) -> Ty {
        self.metas.push(None);
        Ty::Meta(self.metas.len() - 1)
    }

    fn resolve(&self, t: &Ty) -> Ty {
        match t {
            Ty::Meta(m) => match &self.metas[*m] {
                Some(u) => self.resolve(u),
                None => t.clone(),
            },
            Ty::Arrow(a, b) => Ty::Arrow(Box::new(self.resolve(a)), Box::new(self.resolve(b))),
            _ => t.clone(),
        }
    }

    /// Unresolved metavariables default to `K`.
    fn to_cs(&self, t: &Ty) -> CsType {
        match self.resolve(t) {
            Ty::Basic(b) => CsType::Basic(b),
            Ty::RInf => CsType::RInf,
            Ty::K | Ty::Meta(_) => CsType::K,
            Ty::Arrow(a, b) => CsType::arrow(self.to_cs(&a), self.to_cs(&b)),
        }
    }

    fn occurs(&self, m: usize, t: &Ty) -> bool {
        match self.resolve(t) {
            Ty::Meta(n) => n == m,
            Ty::Arrow(a, b) => self.occurs(m, &a) || self.occurs(m, &b),
            _ => false,
        }
    }

    fn unify(&mut self, a: &Ty, b: &Ty, at: &CsTerm) -> Result<(), CsTypeError> {
        let (a, b) = (self.resolve(a), self.resolve(b));
        match (&a, &b) {
            (Ty::Meta(m), Ty::Meta(n)) if m == n => Ok(()),
            (Ty::Meta(m), t) | (t, Ty::Meta(m)) => {
                if self.occurs(*m, t) {
                    return Err(err(CsTypeErrorKind::TypeMismatch, "infinite type", Some(at)));
                }
                self.metas[*m] = Some(t.clone());
                Ok(())
            }
            (Ty::Arrow(a0, a1), Ty::Arrow(b0, b1)) => {
                self.unify(a0, b0, at)?;
                self.unify(a1, b1, at)
            }
            _ if a == b => Ok(()),
            _ => Err(err(
                CsTypeErrorKind::TypeMismatch,
                format!("expected {}, found {}", self.to_cs(&b), self.to_cs(&a)),
                Some(at),
            )),
        }
    }

    fn value(&self, v: &CsTerm) -> Result<(), CsTypeError> {
        if v.is_value() {
            Ok(())
        } else {
            Err(err(CsTypeErrorKind::OperandNotValue, "operand must be a value", Some(v)))
        }
    }

    fn infer(&mut self, env: &mut Vec<(String, Ty)>, t: &CsTerm) -> Result<Ty, CsTypeError> {
        let q = Ty::Basic("Q".into());
        match t {
            CsTerm::Var(x) => env
                .iter()
                .rev()
                .find(|(y, _)| y == x)
                .map(|(_, ty)| ty.clone())
                .ok_or_else(|| err(CsTypeErrorKind::UnboundVariable, format!("unbound variable `{x}`"), Some(t))),
            CsTerm::Lam(x, body) => {
                let a = self.fresh();
                env.push((x.clone(), a.clone()));
                let b = self.infer(env, body);
                env.pop();
                Ok(Ty::Arrow(Box::new(a), Box::new(b?)))
            }
            CsTerm::App(f, v) => {
                self.value(v)?;
                let tf = self.infer(env, f)?;
                let tv = self.infer(env, v)?;
                let r = self.fresh();
                self.unify(&tf, &Ty::Arrow(Box::new(tv), Box::new(r.clone())), t)?;
                Ok(r)
            }
            CsTerm::Ket(_) => Ok(q),
            CsTerm::Gate(g, v) => {
                if !self.decls.gates.contains_key(g) {
                    return Err(err(CsTypeErrorKind::UnknownGate, format!("unknown gate `{g}`"), Some(t)));
                }
                self.value(v)?;
                let tv = self.infer(env, v)?;
                self.unify(&tv, &q, v)?;
                Ok(q)
            }
            CsTerm::Collapse(_, v) => {
                self.value(v)?;
                let tv = self.infer(env, v)?;
                self.unify(&tv, &q, v)?;
                Ok(q)
            }
            CsTerm::Tensor(a, b) => {
                for v in [a, b] {
                    self.value(v)?;
                    let tv = self.infer(env, v)?;
                    self.unify(&tv, &q, v)?;
                }
                Ok(q)
            }
            CsTerm::Cons(c, vs) => {
                let sig = self
                    .decls
                    .cons
                    .get(c)
                    .ok_or_else(|| err(CsTypeErrorKind::UnknownConstructor, format!("unknown constructor `{c}`"), Some(t)))?
                    .clone();
                if vs.len() != sig.arity() {
                    return Err(err(
                        CsTypeErrorKind::ArityMismatch,
                        format!("`{c}` takes {} arguments, got {}", sig.arity(), vs.len()),
                        Some(t),
                    ));
                }
                for (v, b) in vs.iter().zip(sig.classical.iter().chain(&sig.quantum)) {
                    self.value(v)?;
                    let tv = self.infer(env, v)?;
                    self.unify(&tv, &Ty::Basic(b.clone()), v)?;
                }
                Ok(Ty::Basic(sig.result))
            }
            CsTerm::Case(s, arms, def) => {
                self.value(s)?;
                let ts = self.infer(env, s)?;
                let out = self.fresh();
                let mut seen = Vec::new();
                let mut scrut_ty: Option<String> = None;
                for arm in arms {
                    let sig = self
                        .decls
                        .cons
                        .get(&arm.cons)
                        .ok_or_else(|| {
                            err(CsTypeErrorKind::UnknownConstructor, format!("unknown constructor `{}`", arm.cons), Some(t))
                        })?
                        .clone();
                    if arm.params.len() != sig.arity() {
                        return Err(err(CsTypeErrorKind::ArityMismatch, format!("pattern `{}`", arm.cons), Some(t)));
                    }
                    if seen.contains(&arm.cons) {
                        return Err(err(CsTypeErrorKind::TypeMismatch, format!("duplicate arm `{}`", arm.cons), Some(t)));
                    }
                    seen.push(arm.cons.clone());
                    self.unify(&ts, &Ty::Basic(sig.result.clone()), s)?;
                    scrut_ty = Some(sig.result.clone());
                    let n = env.len();
                    for (x, b) in arm.params.iter().zip(sig.classical.iter().chain(&sig.quantum)) {
                        env.push((x.clone(), Ty::Basic(b.clone())));
                    }
                    let tb = self.infer(env, &arm.body);
                    env.truncate(n);
                    self.unify(&tb?, &out, &arm.body)?;
                }
                match def {
                    Some((y, body)) => {
                        env.push((y.clone(), ts.clone()));
                        let tb = self.infer(env, body);
                        env.pop();
                        self.unify(&tb?, &out, body)?;
                    }
                    None => {
                        if let Some(b) = scrut_ty {
                            let all = &self.decls.types[&b].constructors;
                            if let Some(miss) = all.iter().find(|c| !seen.contains(c)) {
                                return Err(err(CsTypeErrorKind::NonExhaustive, format!("no arm for `{miss}`"), Some(t)));
                            }
                        }
                    }
                }
                match self.resolve(&ts) {
                    Ty::Basic(_) | Ty::Meta(_) => Ok(out),
                    other => Err(err(
                        CsTypeErrorKind::TypeMismatch,
                        format!("case on non-basic type {}", self.to_cs(&other)),
                        Some(s),
                    )),
                }
            }
            CsTerm::Letrec(l) => {
                let f = match &l.ann {
                    Some(a) => self.from_cs(a),
                    None => self.fresh(),
                };
                let a = self.fresh();
                env.push((l.fun.clone(), f.clone()));
                env.push((l.param.clone(), a.clone()));
                let b = self.infer(env, &l.body);
                env.truncate(env.len() - 2);
                self.unify(&f, &Ty::Arrow(Box::new(a), Box::new(b?)), t)?;
                self.recs.push((f.clone(), l.fun.clone()));
                Ok(f)
            }
            CsTerm::Real(_) => Ok(if self.opts.k_is_real { Ty::K } else { Ty::RInf }),
            CsTerm::CAdd(a, b) => {
                let ta = self.infer(env, a)?;
                let r = if self.opts.k_is_real { Ty::K } else { Ty::RInf };
                self.unify(&ta, &r, a)?;
                let tb = self.infer(env, b)?;
                self.unify(&tb, &Ty::K, b)?;
                Ok(Ty::K)
            }
            CsTerm::Bary(a, v, b) => {
                self.value(v)?;
                let tv = self.infer(env, v)?;
                self.unify(&tv, &q, v)?;
                for side in [a, b] {
                    let ts = self.infer(env, side)?;
                    self.unify(&ts, &Ty::K, side)?;
                }
                Ok(Ty::K)
            }
        }
    }

    fn check_recs(&mut self) -> Result<(), CsTypeError> {
        for (ty, name) in std::mem::take(&mut self.recs) {
            let mut cur = self.resolve(&ty);
            loop {
                match cur {
                    Ty::Arrow(_, b) => cur = *b,
                    Ty::Meta(m) => {
                        self.metas[m] = Some(Ty::K);
                        break;
                    }
                    Ty::K => break,
                    _ => {
                        return Err(CsTypeError {
                            kind: CsTypeErrorKind::NotFunctionalType,
                            msg: format!("`{name}` has type {}, which does not end in K", self.to_cs(&ty)),
                            term: None,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn run(
    decls: &Decls,
    theta: &[(String, CsType)],
    t: &CsTerm,
    expected: Option<&CsType>,
    opts: CsTypeOptions,
) -> Result<CsType, CsTypeError> {
    let mut inf = Infer { decls, opts, metas: Vec::new(), recs: Vec::new() };
    let mut env: Vec<(String, Ty)> = theta.iter().map(|(x, s)| (x.clone(), inf.from_cs(s))).collect();
    let ty = inf.infer(&mut env, t)?;
    if let Some(e) = expected {
        let e = inf.from_cs(e);
        inf.unify(&ty, &e, t)?;
    }
    inf.check_recs()?;
    Ok(inf.to_cs(&ty))
}

/// `Θ ⊢ T : S`.
pub fn cs_check(
    decls: &Decls,
    theta: &[(String, CsType)],
    t: &CsTerm,
    expected: &CsType,
    opts: CsTypeOptions,
) -> Result<(), CsTypeError> {
    run(decls, theta, t, Some(expected), opts).map(|_| ())
}

/// Most general type, with unconstrained positions read as `K`.
pub fn cs_synth(decls: &Decls, theta: &[(String, CsType)], t: &CsTerm, opts: CsTypeOptions) -> Result<CsType, CsTypeError> {
    run(decls, theta, t, None, opts)
}
