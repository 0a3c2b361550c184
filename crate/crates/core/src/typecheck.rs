//! Dual-context linear type checking for the source language.
//!
//! The exponential context Γ and affine context Δ share one scoped binding
//! stack. Affine splitting is done by consumption threading: each affine
//! binding carries a `used` flag, and multi-premise rules simply check their
//! premises in sequence. Case branches start from the same flags and their
//! consumption is joined afterwards.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::decls::Decls;
use crate::source::{pretty, Program, SType, Term};
use crate::syntax::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TypeErrorKind {
    LinearityViolation,
    AffineLeak,
    UnknownConstructor,
    UnknownGate,
    ArityMismatch,
    TypeMismatch,
    IllFormedType,
    UnboundVariable,
    MissingAnnotation,
    NonExhaustive,
    NoMainTerm,
    BadDeclaration,
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("{kind} (rule {rule}): {msg}{}", term.as_ref().map(|t| format!(" in `{t}`")).unwrap_or_default())]
pub struct TypeError {
    pub kind: TypeErrorKind,
    /// Name of the typing rule whose premise failed.
    pub rule: &'static str,
    pub msg: String,
    /// Offending subterm, printed.
    pub term: Option<String>,
    pub pos: Option<Pos>,
}

impl TypeError {
    fn new(kind: TypeErrorKind, rule: &'static str, msg: impl Into<String>, term: Option<&Term>) -> Self {
        TypeError { kind, rule, msg: msg.into(), term: term.map(pretty), pos: None }
    }
}

#[derive(Debug, Clone)]
struct Binding {
    name: String,
    ty: SType,
    affine: bool,
    used: bool,
}

struct Checker<'d> {
    decls: &'d Decls,
    ctx: Vec<Binding>,
    /// Affine bindings below this index are out of reach.
    barrier: usize,
    barrier_rule: &'static str,
}

use TypeErrorKind as K;

impl<'d> Checker<'d> {
    fn wf(&self, ty: &SType, rule: &'static str) -> Result<(), TypeError> {
        match ty {
            SType::Basic(b) => {
                if self.decls.types.contains_key(b) {
                    Ok(())
                } else {
                    Err(TypeError::new(K::IllFormedType, rule, format!("unknown type `{b}`"), None))
                }
            }
            SType::Lin(a, b) => {
                self.wf(a, rule)?;
                self.wf(b, rule)
            }
            SType::Exp(a, b) => {
                self.wf(a, rule)?;
                self.wf(b, rule)?;
                if !a.is_duplicable(self.decls) {
                    return Err(TypeError::new(
                        K::IllFormedType,
                        rule,
                        format!("domain of `{ty}` is not duplicable"),
                        None,
                    ));
                }
                Ok(())
            }
        }
    }

    fn push(&mut self, name: &str, ty: SType, affine: bool) {
        self.ctx.push(Binding { name: name.into(), ty, affine, used: false });
    }

    fn lookup(&mut self, x: &str, t: &Term) -> Result<SType, TypeError> {
        let Some(i) = self.ctx.iter().rposition(|b| b.name == x) else {
            return Err(TypeError::new(K::UnboundVariable, "ax", format!("`{x}` is not bound"), Some(t)));
        };
        let b = &mut self.ctx[i];
        if b.affine {
            if i < self.barrier {
                return Err(TypeError::new(
                    K::AffineLeak,
                    self.barrier_rule,
                    format!("affine variable `{x}` used where the affine context must be empty"),
                    Some(t),
                ));
            }
            if b.used {
                return Err(TypeError::new(
                    K::LinearityViolation,
                    "ax",
                    format!("affine variable `{x}` used more than once"),
                    Some(t),
                ));
            }
            b.used = true;
        }
        Ok(b.ty.clone())
    }

    fn with_barrier<R>(&mut self, rule: &'static str, f: impl FnOnce(&mut Self) -> R) -> R {
        let saved = (self.barrier, self.barrier_rule);
        self.barrier = self.ctx.len();
        self.barrier_rule = rule;
        let r = f(self);
        (self.barrier, self.barrier_rule) = saved;
        r
    }

    fn scoped<R>(&mut self, f: impl FnOnce(&mut Self) -> R) -> R {
        let n = self.ctx.len();
        let r = f(self);
        self.ctx.truncate(n);
        r
    }

    fn used_flags(&self) -> Vec<bool> {
        self.ctx.iter().map(|b| b.used).collect()
    }

    fn set_flags(&mut self, flags: &[bool]) {
        for (b, &u) in self.ctx.iter_mut().zip(flags) {
            b.used = u;
        }
    }

    fn mismatch(&self, t: &Term, rule: &'static str, want: &SType, got: &SType) -> TypeError {
        TypeError::new(K::TypeMismatch, rule, format!("expected `{want}`, found `{got}`"), Some(t))
    }

    fn check(&mut self, t: &Term, ty: &SType) -> Result<(), TypeError> {
        match t {
            Term::Lam(x, body) => match ty {
                SType::Lin(a, b) => self.scoped(|c| {
                    c.push(x, (**a).clone(), true);
                    c.check(body, b)
                }),
                SType::Exp(a, b) => self.scoped(|c| {
                    c.push(x, (**a).clone(), false);
                    c.check(body, b)
                }),
                SType::Basic(_) => Err(TypeError::new(
                    K::TypeMismatch,
                    "-o_i",
                    format!("abstraction checked against basic type `{ty}`"),
                    Some(t),
                )),
            },
            Term::Letrec(l) => {
                if let Some(ann) = &l.ann {
                    self.wf(ann, "rec")?;
                    if ann != ty {
                        return Err(self.mismatch(t, "rec", ty, ann));
                    }
                }
                if !ty.is_arrow() {
                    return Err(TypeError::new(
                        K::TypeMismatch,
                        "rec",
                        format!("recursive definition checked against non-function type `{ty}`"),
                        Some(t),
                    ));
                }
                let lam = Term::Lam(l.param.clone(), Box::new(l.body.clone()));
                self.with_barrier("rec", |c| {
                    c.scoped(|c| {
                        c.push(&l.fun, ty.clone(), false);
                        c.check(&lam, ty)
                    })
                })
            }
            Term::Case(..) => self.case(t, Some(ty)).map(|_| ()),
            Term::Tick(inner) => self.check(inner, ty),
            _ => {
                let got = self.synth(t)?;
                if &got == ty {
                    Ok(())
                } else {
                    Err(self.mismatch(t, rule_of(t), ty, &got))
                }
            }
        }
    }

    fn synth(&mut self, t: &Term) -> Result<SType, TypeError> {
        let q = || SType::basic("Q");
        match t {
            Term::Var(x) => self.lookup(x, t),
            Term::Lam(..) => Err(TypeError::new(
                K::MissingAnnotation,
                "-o_i",
                "cannot infer the type of an abstraction here",
                Some(t),
            )),
            Term::Letrec(l) => match &l.ann {
                Some(ann) => {
                    self.check(t, ann)?;
                    Ok(ann.clone())
                }
                None => Err(TypeError::new(
                    K::MissingAnnotation,
                    "rec",
                    "recursive definition needs a type annotation here",
                    Some(t),
                )),
            },
            Term::App(f, a) => {
                if let Term::Lam(x, body) = &**f {
                    // a let-style redex: the argument type drives the binder
                    let before = self.used_flags();
                    let ta = match self.synth(a) {
                        Ok(ta) => ta,
                        // a closed unannotated abstraction is typed at its use sites
                        Err(e) if e.kind == K::MissingAnnotation && a.free_vars().is_empty() => {
                            self.set_flags(&before);
                            return self.synth(&body.subst(&[(x.clone(), (**a).clone())]));
                        }
                        Err(e) => return Err(e),
                    };
                    let after = self.used_flags();
                    let consumed = before.iter().zip(&after).any(|(b, a)| !b && *a);
                    let affine = consumed || !ta.is_duplicable(self.decls);
                    return self.scoped(|c| {
                        c.push(x, ta, affine);
                        c.synth(body)
                    });
                }
                match self.synth(f)? {
                    SType::Lin(dom, cod) => {
                        self.check(a, &dom)?;
                        Ok(*cod)
                    }
                    SType::Exp(dom, cod) => {
                        self.with_barrier("=>_e", |c| c.check(a, &dom))?;
                        Ok(*cod)
                    }
                    other => Err(TypeError::new(
                        K::TypeMismatch,
                        "-o_e",
                        format!("applying a term of basic type `{other}`"),
                        Some(t),
                    )),
                }
            }
            Term::Ket(_) => Ok(q()),
            Term::Gate(g, a) => {
                if !self.decls.gates.contains_key(g) {
                    return Err(TypeError::new(K::UnknownGate, "un", format!("unknown gate `{g}`"), Some(t)));
                }
                self.check(a, &q())?;
                Ok(q())
            }
            Term::Meas(a) => {
                self.check(a, &q())?;
                Ok(SType::basic("Out"))
            }
            Term::Tensor(a, b) => {
                self.check(a, &q())?;
                self.check(b, &q())?;
                Ok(q())
            }
            Term::Cons(c, cl, qu) => {
                let Some(sig) = self.decls.cons.get(c).cloned() else {
                    return Err(TypeError::new(K::UnknownConstructor, "cons", format!("unknown constructor `{c}`"), Some(t)));
                };
                if cl.len() != sig.classical.len() || qu.len() != sig.quantum.len() {
                    return Err(TypeError::new(
                        K::ArityMismatch,
                        "cons",
                        format!(
                            "`{c}` takes {};{} arguments, given {};{}",
                            sig.classical.len(),
                            sig.quantum.len(),
                            cl.len(),
                            qu.len()
                        ),
                        Some(t),
                    ));
                }
                for (arg, ty) in cl.iter().zip(&sig.classical).chain(qu.iter().zip(&sig.quantum)) {
                    self.check(arg, &SType::Basic(ty.clone()))?;
                }
                Ok(SType::Basic(sig.result))
            }
            Term::Case(..) => self.case(t, None),
            Term::Tick(a) => self.synth(a),
        }
    }

    fn case(&mut self, t: &Term, expected: Option<&SType>) -> Result<SType, TypeError> {
        let Term::Case(scrut, arms, default) = t else { unreachable!("case() called on a non-case term") };
        let sty = self.synth(scrut)?;
        let SType::Basic(b) = &sty else {
            return Err(TypeError::new(
                K::TypeMismatch,
                "case",
                format!("scrutinee has function type `{sty}`"),
                Some(scrut),
            ));
        };
        let bty = self.decls.types.get(b).cloned().expect("synthesized types are well formed");
        let mut seen: Vec<&str> = Vec::new();
        for arm in arms {
            let Some(sig) = self.decls.cons.get(&arm.cons) else {
                return Err(TypeError::new(K::UnknownConstructor, "case", format!("unknown constructor `{}`", arm.cons), Some(t)));
            };
            if &sig.result != b {
                return Err(TypeError::new(
                    K::TypeMismatch,
                    "case",
                    format!("pattern `{}` belongs to `{}`, scrutinee has type `{b}`", arm.cons, sig.result),
                    Some(t),
                ));
            }
            if arm.classical.len() != sig.classical.len() || arm.quantum.len() != sig.quantum.len() {
                return Err(TypeError::new(K::ArityMismatch, "case", format!("pattern `{}` has the wrong arity", arm.cons), Some(t)));
            }
            if seen.contains(&arm.cons.as_str()) {
                return Err(TypeError::new(K::TypeMismatch, "case", format!("duplicate arm `{}`", arm.cons), Some(t)));
            }
            seen.push(&arm.cons);
        }
        if default.is_none() {
            if let Some(missing) = bty.constructors.iter().find(|c| !seen.contains(&c.as_str())) {
                return Err(TypeError::new(K::NonExhaustive, "case", format!("no arm for `{missing}`"), Some(t)));
            }
        }

        let start = self.used_flags();
        let mut joined = start.clone();
        let mut result: Option<SType> = expected.cloned();
        let mut run_branch = |c: &mut Self, binds: Vec<(String, SType, bool)>, body: &Term| -> Result<(), TypeError> {
            c.set_flags(&start);
            c.scoped(|c| {
                for (x, ty, aff) in binds {
                    c.push(&x, ty, aff);
                }
                match &result {
                    Some(ty) => c.check(body, ty),
                    None => {
                        result = Some(c.synth(body)?);
                        Ok(())
                    }
                }
            })?;
            for (j, u) in joined.iter_mut().zip(c.used_flags()) {
                *j |= u;
            }
            Ok(())
        };
        for arm in arms {
            let sig = &self.decls.cons[&arm.cons];
            let binds: Vec<(String, SType, bool)> = arm
                .classical
                .iter()
                .zip(&sig.classical)
                .map(|(x, ty)| (x.clone(), SType::Basic(ty.clone()), false))
                .chain(arm.quantum.iter().zip(&sig.quantum).map(|(x, ty)| (x.clone(), SType::Basic(ty.clone()), true)))
                .collect();
            run_branch(self, binds, &arm.body)?;
        }
        if let Some((y, body)) = default {
            run_branch(self, vec![(y.clone(), sty.clone(), bty.quantum)], body)?;
        }
        self.set_flags(&joined);
        Ok(result.expect("a case has at least one branch"))
    }
}

fn rule_of(t: &Term) -> &'static str {
    match t {
        Term::Var(_) => "ax",
        Term::Lam(..) => "-o_i",
        Term::App(..) => "-o_e",
        Term::Ket(_) => "st",
        Term::Gate(..) => "un",
        Term::Meas(_) => "meas",
        Term::Tensor(..) => "prod",
        Term::Cons(..) => "cons",
        Term::Case(..) => "case",
        Term::Letrec(_) => "rec",
        Term::Tick(_) => "tick",
    }
}

fn checker<'d>(
    decls: &'d Decls,
    gamma: &[(String, SType)],
    delta: &[(String, SType)],
) -> Result<Checker<'d>, TypeError> {
    let mut c = Checker { decls, ctx: Vec::new(), barrier: 0, barrier_rule: "" };
    for (x, ty) in gamma {
        c.wf(ty, "ax_c")?;
        if !ty.is_duplicable(decls) {
            return Err(TypeError::new(
                K::IllFormedType,
                "ax_c",
                format!("exponential variable `{x}` has non-duplicable type `{ty}`"),
                None,
            ));
        }
        c.push(x, ty.clone(), false);
    }
    for (x, ty) in delta {
        c.wf(ty, "ax")?;
        if gamma.iter().any(|(y, _)| y == x) {
            return Err(TypeError::new(K::IllFormedType, "ax", format!("`{x}` bound in both contexts"), None));
        }
        c.push(x, ty.clone(), true);
    }
    Ok(c)
}

/// `Γ;Δ ⊢ t : T`.
pub fn check_term(
    decls: &Decls,
    gamma: &[(String, SType)],
    delta: &[(String, SType)],
    t: &Term,
    ty: &SType,
) -> Result<(), TypeError> {
    let mut c = checker(decls, gamma, delta)?;
    c.wf(ty, "program")?;
    c.check(t, ty)
}

/// Infers a type where the term carries enough annotations.
pub fn synth_term(
    decls: &Decls,
    gamma: &[(String, SType)],
    delta: &[(String, SType)],
    t: &Term,
) -> Result<SType, TypeError> {
    checker(decls, gamma, delta)?.synth(t)
}

/// Splits program inputs into exponential and affine contexts.
pub fn input_contexts(p: &Program) -> (Vec<(String, SType)>, Vec<(String, SType)>) {
    let mut gamma = Vec::new();
    let mut delta = Vec::new();
    for i in &p.inputs {
        if i.ty.is_duplicable(&p.decls) {
            gamma.push((i.name.clone(), i.ty.clone()));
        } else {
            delta.push((i.name.clone(), i.ty.clone()));
        }
    }
    (gamma, delta)
}

/// Validates declarations, input values, and the main term against
/// `ty_override`, the program's `main` annotation, or an inferred type.
pub fn check_program(p: &Program, ty_override: Option<&SType>) -> Result<SType, Vec<TypeError>> {
    let mut errs: Vec<TypeError> = p
        .decls
        .validate()
        .into_iter()
        .map(|(e, pos)| TypeError { kind: K::BadDeclaration, rule: "cons", msg: e.to_string(), term: None, pos: Some(pos) })
        .collect();
    for i in &p.inputs {
        let at = |mut e: TypeError| {
            e.pos = Some(i.pos);
            e
        };
        if let Some(v) = &i.value {
            if !v.is_value() || !v.free_vars().is_empty() {
                errs.push(at(TypeError::new(K::TypeMismatch, "program", format!("input `{}` must be a closed value", i.name), Some(v))));
                continue;
            }
            if let Err(e) = check_term(&p.decls, &[], &[], v, &i.ty) {
                errs.push(at(e));
            }
        } else if let Err(e) = checker(&p.decls, &[], &[]).and_then(|c| c.wf(&i.ty, "program")) {
            errs.push(at(e));
        }
    }
    if !errs.is_empty() {
        return Err(errs);
    }
    let Some(term) = &p.term else {
        return Err(vec![TypeError {
            kind: K::NoMainTerm,
            rule: "program",
            msg: "program has no main term".into(),
            term: None,
            pos: Some(p.term_pos),
        }]);
    };
    let (gamma, delta) = input_contexts(p);
    let with_pos = |mut e: TypeError| {
        e.pos.get_or_insert(p.term_pos);
        vec![e]
    };
    match ty_override.or(p.main_ty.as_ref()) {
        Some(ty) => check_term(&p.decls, &gamma, &delta, term, ty).map(|_| ty.clone()).map_err(with_pos),
        None => synth_term(&p.decls, &gamma, &delta, term).map_err(with_pos),
    }
}
