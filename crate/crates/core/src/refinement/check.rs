//! Well-formedness, admissibility, subtyping and the typing judgement.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::cs::{cs_check, cs_pretty, CsLetrec, CsTerm, CsType, CsTypeOptions};

use super::oracle::{validity, OracleConfig, Verdict};
use super::{fresh_name, value_to_fexpr, CtxEntry, Defs, FExpr, Formula, Op, RefContext, RefType, Rel};

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub enum RefineError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("ill-typed formula: {0}")]
    IllTypedFormula(String),
    #[error("`{0}` is bound twice in the context")]
    DuplicateBinding(String),
    #[error("skeleton mismatch: {0}")]
    SkeletonMismatch(String),
    #[error("not admissible: {0}")]
    NotAdmissible(String),
    #[error("cannot derive a type for `{0}`")]
    Unsupported(String),
}

type Env = Vec<(String, CsType)>;

fn is_real(t: &CsType) -> bool {
    matches!(t, CsType::K | CsType::RInf)
}

/// Equal skeletons, reading `K` and `R+inf` as one carrier.
fn compatible(a: &CsType, b: &CsType) -> bool {
    match (a, b) {
        (CsType::Arrow(a0, a1), CsType::Arrow(b0, b1)) => compatible(a0, b0) && compatible(a1, b1),
        _ => a == b || (is_real(a) && is_real(b)),
    }
}

fn lookup<'e>(env: &'e Env, x: &str) -> Option<&'e CsType> {
    env.iter().rev().find(|(y, _)| y == x).map(|(_, t)| t)
}

fn expr_type(defs: &Defs, env: &Env, e: &FExpr) -> Result<CsType, RefineError> {
    let q = CsType::basic("Q");
    let want = |e: &FExpr, t: &CsType| -> Result<(), RefineError> {
        let got = expr_type(defs, env, e)?;
        if compatible(&got, t) {
            Ok(())
        } else {
            Err(RefineError::IllTypedFormula(format!("`{e}` has type {got}, expected {t}")))
        }
    };
    Ok(match e {
        FExpr::Var(x) => match lookup(env, x) {
            Some(t) => t.clone(),
            None => match defs.candidate(x) {
                Some(c) => c.skeleton(),
                None => return Err(RefineError::UnboundVariable(x.clone())),
            },
        },
        FExpr::Num(_) => CsType::RInf,
        FExpr::Ket(_) => q,
        FExpr::Bin(op, a, b) => {
            want(a, &CsType::RInf)?;
            want(b, &CsType::RInf)?;
            if *op == Op::CAdd {
                CsType::K
            } else {
                CsType::RInf
            }
        }
        FExpr::Bary(a, v, b) => {
            want(a, &CsType::K)?;
            want(v, &q)?;
            want(b, &CsType::K)?;
            CsType::K
        }
        FExpr::Prob(_, v) => {
            want(v, &q)?;
            CsType::RInf
        }
        FExpr::Collapse(_, v) => {
            want(v, &q)?;
            q
        }
        FExpr::Gate(g, v) => {
            if !defs.decls.gates.contains_key(g) {
                return Err(RefineError::IllTypedFormula(format!("unknown gate `{g}`")));
            }
            want(v, &q)?;
            q
        }
        FExpr::Tensor(a, b) => {
            want(a, &q)?;
            want(b, &q)?;
            q
        }
        FExpr::Cons(c, args) => {
            let sig = defs
                .decls
                .cons
                .get(c)
                .ok_or_else(|| RefineError::IllTypedFormula(format!("unknown constructor `{c}`")))?;
            if sig.arity() != args.len() {
                return Err(RefineError::IllTypedFormula(format!("`{c}` takes {} arguments", sig.arity())));
            }
            for (a, t) in args.iter().zip(sig.classical.iter().chain(&sig.quantum)) {
                want(a, &CsType::basic(t))?;
            }
            CsType::basic(&sig.result)
        }
        FExpr::Call(f, args) => {
            let mut t = match lookup(env, f) {
                Some(t) => t.clone(),
                None => defs
                    .candidate(f)
                    .map(|c| c.skeleton())
                    .ok_or_else(|| RefineError::UnboundVariable(f.clone()))?,
            };
            for a in args {
                let CsType::Arrow(dom, cod) = t else {
                    return Err(RefineError::IllTypedFormula(format!("`{f}` applied to too many arguments")));
                };
                want(a, &dom)?;
                t = *cod;
            }
            t
        }
    })
}

fn formula_type_in(defs: &Defs, env: &mut Env, phi: &Formula) -> Result<(), RefineError> {
    match phi {
        Formula::True | Formula::False => Ok(()),
        Formula::Atom(rel, a, b) => {
            let ta = expr_type(defs, env, a)?;
            let tb = expr_type(defs, env, b)?;
            let ok = match rel {
                Rel::Eq | Rel::Ne => compatible(&ta, &tb) && !matches!(ta, CsType::Arrow(..)),
                Rel::Le | Rel::Sqsub => is_real(&ta) && is_real(&tb),
            };
            if ok {
                Ok(())
            } else {
                Err(RefineError::IllTypedFormula(format!("`{phi}` compares {ta} with {tb}")))
            }
        }
        Formula::IsCons(c, e) => {
            let sig = defs
                .decls
                .cons
                .get(c)
                .ok_or_else(|| RefineError::IllTypedFormula(format!("unknown constructor `{c}`")))?;
            let t = expr_type(defs, env, e)?;
            if t == CsType::basic(&sig.result) {
                Ok(())
            } else {
                Err(RefineError::IllTypedFormula(format!("`{e}` has type {t}, not {}", sig.result)))
            }
        }
        Formula::Not(a) => formula_type_in(defs, env, a),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            formula_type_in(defs, env, a)?;
            formula_type_in(defs, env, b)
        }
        Formula::Forall(x, t, a) | Formula::Exists(x, t, a) => {
            env.push((x.clone(), t.clone()));
            let r = formula_type_in(defs, env, a);
            env.pop();
            r
        }
    }
}

/// `Θ ⊢ φ : Bool`.
pub fn formula_type(defs: &Defs, env: &[(String, CsType)], phi: &Formula) -> Result<(), RefineError> {
    formula_type_in(defs, &mut env.to_vec(), phi)
}

fn base_ok(defs: &Defs, t: &CsType) -> Result<(), RefineError> {
    match t {
        CsType::K | CsType::RInf => Ok(()),
        CsType::Basic(b) if defs.decls.types.contains_key(b) => Ok(()),
        CsType::Basic(b) => Err(RefineError::IllTypedFormula(format!("unknown base type `{b}`"))),
        CsType::Arrow(..) => Err(RefineError::IllTypedFormula(format!("refined base must not be an arrow: {t}"))),
    }
}

fn wf_type(defs: &Defs, env: &mut Env, t: &RefType) -> Result<(), RefineError> {
    match t {
        RefType::Base { base, z, phi } => {
            base_ok(defs, base)?;
            env.push((z.clone(), base.clone()));
            let r = formula_type_in(defs, env, phi);
            env.pop();
            r
        }
        RefType::Arrow { x, dom, cod } | RefType::Forall { x, bound: dom, body: cod } => {
            wf_type(defs, env, dom)?;
            env.push((x.clone(), dom.skeleton()));
            let r = wf_type(defs, env, cod);
            env.pop();
            r
        }
    }
}

/// `⊩wf Γ̇`, returning the skeleton context.
pub fn wf_context(defs: &Defs, ctx: &RefContext) -> Result<Vec<(String, CsType)>, RefineError> {
    let mut env = Env::new();
    for e in &ctx.entries {
        match e {
            CtxEntry::Bind(x, t) => {
                if lookup(&env, x).is_some() {
                    return Err(RefineError::DuplicateBinding(x.clone()));
                }
                wf_type(defs, &mut env, t)?;
                env.push((x.clone(), t.skeleton()));
            }
            CtxEntry::Fact(phi) => formula_type_in(defs, &mut env, phi)?,
        }
    }
    Ok(env)
}

/// `Γ̇ ⊩wf τ̇`.
pub fn wf(defs: &Defs, ctx: &RefContext, t: &RefType) -> Result<(), RefineError> {
    let mut env = wf_context(defs, ctx)?;
    wf_type(defs, &mut env, t)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub reason: String,
}

/// Sufficient syntactic test: every cost refinement in return position is
/// `⊤` or a conjunction of upper bounds `Z ≤ e` / `Z ⊑ e` with `Z ∉ fv(e)`.
pub fn admissible(t: &RefType) -> Admissibility {
    let yes = |reason: String| Admissibility { admissible: true, reason };
    let no = |reason: String| Admissibility { admissible: false, reason };
    match t {
        RefType::Base { base, z, phi } => {
            if !is_real(base) {
                return no(format!("{base} is not a cost type"));
            }
            if *phi == Formula::True {
                return yes("unrefined cost type".into());
            }
            for c in phi.conjuncts() {
                match c {
                    Formula::Atom(Rel::Le | Rel::Sqsub, FExpr::Var(v), e) if v == z && !e.free_vars().contains(z) => {}
                    _ => return no(format!("`{c}` is not an upper bound on {z}")),
                }
            }
            yes(format!("upper bound on {z}"))
        }
        RefType::Arrow { cod, .. } => admissible(cod),
        RefType::Forall { body, .. } => admissible(body),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceLine {
    pub rule: String,
    pub detail: String,
    pub verdict: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub verdict: Verdict,
    pub trace: Vec<TraceLine>,
    pub seed: u64,
    pub samples: usize,
}

struct Checker<'d> {
    defs: &'d Defs,
    cfg: &'d OracleConfig,
    trace: Vec<TraceLine>,
    verdict: Verdict,
}

impl Checker<'_> {
    fn note(&mut self, rule: &str, detail: String, v: &Verdict) {
        self.trace.push(TraceLine { rule: rule.into(), detail, verdict: v.to_string() });
    }

    fn oracle(&mut self, rule: &str, ctx: &RefContext, phi: &Formula) -> Verdict {
        let v = validity(self.defs, ctx, phi, self.cfg);
        self.note(rule, format!("{ctx} |= {phi}"), &v);
        self.verdict = std::mem::replace(&mut self.verdict, Verdict::VerifiedSyntactic).meet(v.clone());
        v
    }

    fn avoid(ctx: &RefContext, extra: &[&RefType]) -> BTreeSet<String> {
        let mut s = ctx.names();
        for t in extra {
            t.all_vars(&mut s);
        }
        s
    }

    /// Instances tried for `∀x : bound`: the same name in scope, then every
    /// unrefined-bound match among the candidates.
    fn instances(&self, ctx: &RefContext, x: &str, bound: &RefType) -> Vec<FExpr> {
        let mut out = Vec::new();
        if let Some(t) = ctx.lookup(x) {
            if compatible(&t.skeleton(), &bound.skeleton()) {
                out.push(FExpr::var(x));
            }
        }
        if refinement_free(bound) {
            let sk = bound.skeleton();
            for c in &self.defs.candidates {
                if compatible(&c.skeleton(), &sk) {
                    out.push(FExpr::var(&c.name));
                }
            }
        }
        out
    }

    fn subtype(&mut self, ctx: &RefContext, a: &RefType, b: &RefType) -> Result<(), RefineError> {
        if a == b {
            self.note("re", format!("{a} <: {b}"), &Verdict::VerifiedSyntactic);
            return Ok(());
        }
        match (a, b) {
            (RefType::Base { base: i1, z: z1, phi: p1 }, RefType::Base { base: i2, z: z2, phi: p2 }) => {
                if !compatible(i1, i2) {
                    return Err(RefineError::SkeletonMismatch(format!("{a} <: {b}")));
                }
                if *p2 == Formula::True {
                    self.note("ba", format!("{a} <: {b}"), &Verdict::VerifiedSyntactic);
                    return Ok(());
                }
                let z = fresh_name("Z", &Self::avoid(ctx, &[a, b]));
                let zv = FExpr::var(&z);
                let phi = Formula::forall(&z, i2.clone(), Formula::implies(p1.subst(z1, &zv), p2.subst(z2, &zv)));
                self.oracle("ba", ctx, &phi);
                Ok(())
            }
            (RefType::Arrow { x, dom: d1, cod: c1 }, RefType::Arrow { x: y, dom: d2, cod: c2 }) => {
                self.subtype(ctx, d2, d1)?;
                let c1 = if x == y { (**c1).clone() } else { c1.subst(x, &FExpr::var(y)) };
                self.subtype(&ctx.bind(y, (**d2).clone()), &c1, c2)
            }
            (_, RefType::Forall { x, bound, body }) => {
                let (x, body) = self.open_binder(ctx, x, body, &[a]);
                self.subtype(&ctx.bind(&x, (**bound).clone()), a, &body)
            }
            (RefType::Forall { x, bound, body }, _) => {
                for inst in self.instances(ctx, x, bound) {
                    let saved = (self.trace.len(), self.verdict.clone());
                    let t = body.subst(x, &inst);
                    if self.subtype(ctx, &t, b).is_ok() && !self.verdict.is_falsified() {
                        return Ok(());
                    }
                    self.trace.truncate(saved.0);
                    self.verdict = saved.1;
                }
                Err(RefineError::Unsupported(format!("no instance of `{x}` makes {a} <: {b}")))
            }
            _ => Err(RefineError::SkeletonMismatch(format!("{a} <: {b}"))),
        }
    }

    /// Renames a binder that clashes with the context or `others`.
    fn open_binder(&self, ctx: &RefContext, x: &str, body: &RefType, others: &[&RefType]) -> (String, RefType) {
        let mut avoid = Self::avoid(ctx, others);
        avoid.remove(x);
        if ctx.lookup(x).is_none() && !others.iter().any(|t| t.free_vars().contains(x)) {
            return (x.to_string(), body.clone());
        }
        let mut all = Self::avoid(ctx, &[body]);
        all.extend(avoid);
        let fresh = fresh_name(x, &all);
        (fresh.clone(), body.subst(x, &FExpr::var(&fresh)))
    }

    fn fexpr_of(&self, v: &CsTerm) -> Result<FExpr, RefineError> {
        value_to_fexpr(v).ok_or_else(|| RefineError::Unsupported(cs_pretty(v)))
    }

    fn synth_base(&mut self, ctx: &RefContext, t: &CsTerm) -> Result<(CsType, String, Formula), RefineError> {
        match self.synth(ctx, t)? {
            RefType::Base { base, z, phi } => Ok((base, z, phi)),
            other => Err(RefineError::SkeletonMismatch(format!("`{}` has type {other}, expected a base type", cs_pretty(t)))),
        }
    }

    fn synth(&mut self, ctx: &RefContext, t: &CsTerm) -> Result<RefType, RefineError> {
        let q = CsType::basic("Q");
        let avoid = |extra: &[&str]| {
            let mut s = ctx.names();
            s.extend(t.free_vars());
            s.extend(extra.iter().map(|x| x.to_string()));
            s
        };
        let exact = |base: CsType, e: FExpr, rest: Vec<Formula>, z: &str| {
            let mut parts = vec![Formula::atom(Rel::Eq, FExpr::var(z), e)];
            parts.extend(rest);
            RefType::base(base, z, Formula::conj(parts))
        };
        match t {
            CsTerm::Var(x) => {
                let ty = ctx.lookup(x).ok_or_else(|| RefineError::UnboundVariable(x.clone()))?.clone();
                Ok(match ty {
                    RefType::Base { base, .. } => {
                        let z = fresh_name("Z", &avoid(&[]));
                        exact(base, FExpr::var(x), vec![], &z)
                    }
                    other => other,
                })
            }
            CsTerm::Real(r) => Ok(exact(CsType::RInf, FExpr::Num(*r), vec![], "Z")),
            CsTerm::Ket(st) => Ok(exact(q, FExpr::Ket(st.clone()), vec![], "Z")),
            CsTerm::Gate(..) | CsTerm::Collapse(..) => {
                let (CsTerm::Gate(_, v) | CsTerm::Collapse(_, v)) = t else { unreachable!() };
                let (base, z, phi) = self.synth_base(ctx, v)?;
                if base != q {
                    return Err(RefineError::SkeletonMismatch(format!("`{}` is not quantum", cs_pretty(v))));
                }
                let ve = self.fexpr_of(v)?;
                let z2 = fresh_name("Z", &avoid(&[]));
                Ok(exact(q, self.fexpr_of(t)?, vec![phi.subst(&z, &ve)], &z2))
            }
            CsTerm::Tensor(a, b) => {
                let (_, za, pa) = self.synth_base(ctx, a)?;
                let (_, zb, pb) = self.synth_base(ctx, b)?;
                let z = fresh_name("Z", &avoid(&[]));
                let rest = vec![pa.subst(&za, &self.fexpr_of(a)?), pb.subst(&zb, &self.fexpr_of(b)?)];
                Ok(exact(q, self.fexpr_of(t)?, rest, &z))
            }
            CsTerm::Cons(c, args) => {
                let sig = self
                    .defs
                    .decls
                    .cons
                    .get(c)
                    .ok_or_else(|| RefineError::Unsupported(format!("unknown constructor `{c}`")))?
                    .clone();
                let mut rest = Vec::new();
                for a in args {
                    let (_, za, pa) = self.synth_base(ctx, a)?;
                    rest.push(pa.subst(&za, &self.fexpr_of(a)?));
                }
                let z = fresh_name("Z", &avoid(&[]));
                Ok(exact(CsType::basic(&sig.result), self.fexpr_of(t)?, rest, &z))
            }
            CsTerm::CAdd(a, b) => {
                let (ia, za, pa) = self.synth_base(ctx, a)?;
                let (ib, zb, pb) = self.synth_base(ctx, b)?;
                if !is_real(&ia) || !is_real(&ib) {
                    return Err(RefineError::SkeletonMismatch(format!("`{}` is not a cost", cs_pretty(t))));
                }
                let mut used = avoid(&[]);
                pa.all_vars(&mut used);
                pb.all_vars(&mut used);
                let z0 = fresh_name("Z", &used);
                used.insert(z0.clone());
                let z1 = fresh_name("Z", &used);
                used.insert(z1.clone());
                let z = fresh_name("Z", &used);
                let body = Formula::conj([
                    Formula::atom(Rel::Eq, FExpr::var(&z), FExpr::bin(Op::CAdd, FExpr::var(&z0), FExpr::var(&z1))),
                    pa.subst(&za, &FExpr::var(&z0)),
                    pb.subst(&zb, &FExpr::var(&z1)),
                ]);
                let phi = Formula::exists(&z0, CsType::RInf, Formula::exists(&z1, CsType::K, body));
                Ok(RefType::base(CsType::K, &z, phi))
            }
            CsTerm::Bary(a, v, b) => {
                let (ia, za, pa) = self.synth_base(ctx, a)?;
                let (ib, zb, pb) = self.synth_base(ctx, b)?;
                let (_, zv, pv) = self.synth_base(ctx, v)?;
                if !is_real(&ia) || !is_real(&ib) {
                    return Err(RefineError::SkeletonMismatch(format!("`{}` is not a cost", cs_pretty(t))));
                }
                let ve = self.fexpr_of(v)?;
                let mut used = avoid(&[]);
                pa.all_vars(&mut used);
                pb.all_vars(&mut used);
                let z0 = fresh_name("Z", &used);
                used.insert(z0.clone());
                let z1 = fresh_name("Z", &used);
                used.insert(z1.clone());
                let z = fresh_name("Z", &used);
                let body = Formula::conj([
                    Formula::atom(
                        Rel::Eq,
                        FExpr::var(&z),
                        FExpr::Bary(Box::new(FExpr::var(&z0)), Box::new(ve.clone()), Box::new(FExpr::var(&z1))),
                    ),
                    pa.subst(&za, &FExpr::var(&z0)),
                    pb.subst(&zb, &FExpr::var(&z1)),
                    pv.subst(&zv, &ve),
                ]);
                let phi = Formula::exists(&z0, CsType::K, Formula::exists(&z1, CsType::K, body));
                Ok(RefType::base(CsType::K, &z, phi))
            }
            // operands are values, so an unannotated redex is typed by its contractum
            CsTerm::App(f, v) if matches!(&**f, CsTerm::Lam(..)) => {
                let CsTerm::Lam(y, body) = &**f else { unreachable!() };
                self.note("beta", cs_pretty(t), &Verdict::VerifiedSyntactic);
                self.synth(ctx, &body.subst(&[(y.clone(), (**v).clone())]))
            }
            CsTerm::App(f, v) => {
                let mut ft = self.synth(ctx, f)?;
                while let RefType::Forall { x, bound, body } = &ft {
                    let inst = self
                        .instances(ctx, x, bound)
                        .into_iter()
                        .next()
                        .ok_or_else(|| RefineError::Unsupported(format!("no instance for `{x}` in {}", cs_pretty(t))))?;
                    self.note("inst", format!("{x} := {inst}"), &Verdict::VerifiedSyntactic);
                    ft = body.subst(x, &inst);
                }
                let RefType::Arrow { x, dom, cod } = ft else {
                    return Err(RefineError::SkeletonMismatch(format!("`{}` is not a function", cs_pretty(f))));
                };
                self.check(ctx, v, &dom)?;
                if cod.free_vars().contains(&x) {
                    Ok(cod.subst(&x, &self.fexpr_of(v)?))
                } else {
                    Ok(*cod)
                }
            }
            _ => Err(RefineError::Unsupported(cs_pretty(t))),
        }
    }

    fn check(&mut self, ctx: &RefContext, t: &CsTerm, ty: &RefType) -> Result<(), RefineError> {
        match (t, ty) {
            (_, RefType::Forall { x, bound, body }) => {
                let mut avoid = ctx.names();
                avoid.extend(t.free_vars());
                let (x, body) = if avoid.contains(x) {
                    let mut all = avoid;
                    body.all_vars(&mut all);
                    let fresh = fresh_name(x, &all);
                    (fresh.clone(), body.subst(x, &FExpr::var(&fresh)))
                } else {
                    (x.clone(), (**body).clone())
                };
                self.check(&ctx.bind(&x, (**bound).clone()), t, &body)
            }
            (CsTerm::Lam(x, body), RefType::Arrow { x: y, dom, cod }) => {
                let cod = if x == y { (**cod).clone() } else { cod.subst(y, &FExpr::var(x)) };
                self.check(&ctx.bind(x, (**dom).clone()), body, &cod)
            }
            (CsTerm::Letrec(lr), _) => {
                let adm = admissible(ty);
                if !adm.admissible {
                    return Err(RefineError::NotAdmissible(adm.reason));
                }
                self.note("rec", format!("{} : {ty} ({})", lr.fun, adm.reason), &Verdict::VerifiedSyntactic);
                let CsLetrec { fun, param, body, .. } = &**lr;
                self.check(&ctx.bind(fun, ty.clone()), &CsTerm::lam(param, body.clone()), ty)
            }
            (CsTerm::Case(v, arms, default), _) => {
                let (base, z, phi) = self.synth_base(ctx, v)?;
                let ve = self.fexpr_of(v)?;
                for arm in arms {
                    let sig = self
                        .defs
                        .decls
                        .cons
                        .get(&arm.cons)
                        .ok_or_else(|| RefineError::Unsupported(format!("unknown constructor `{}`", arm.cons)))?
                        .clone();
                    let mut inner = ctx.clone();
                    for (p, pty) in arm.params.iter().zip(sig.classical.iter().chain(&sig.quantum)) {
                        inner = inner.bind(p, RefType::plain(CsType::basic(pty)));
                    }
                    let pat = FExpr::Cons(arm.cons.clone(), arm.params.iter().map(|p| FExpr::var(p)).collect());
                    inner = inner.fact(Formula::atom(Rel::Eq, ve.clone(), pat));
                    self.check(&inner, &arm.body, ty)?;
                }
                if let Some((y, body)) = default {
                    let excluded = Formula::conj(arms.iter().map(|a| Formula::not(Formula::IsCons(a.cons.clone(), FExpr::var(y)))));
                    let inner = ctx
                        .bind(y, RefType::base(base, &z, phi))
                        .fact(Formula::atom(Rel::Eq, FExpr::var(y), ve))
                        .fact(excluded);
                    self.check(&inner, body, ty)?;
                }
                Ok(())
            }
            _ => {
                let s = self.synth(ctx, t)?;
                self.subtype(ctx, &s, ty)
            }
        }
    }
}

fn refinement_free(t: &RefType) -> bool {
    match t {
        RefType::Base { phi, .. } => *phi == Formula::True,
        RefType::Arrow { dom, cod, .. } => refinement_free(dom) && refinement_free(cod),
        RefType::Forall { bound, body, .. } => refinement_free(bound) && refinement_free(body),
    }
}

/// `Γ̇ ⊢ τ̇ <: τ̇'`, with base cases discharged by the oracle.
pub fn subtype(defs: &Defs, ctx: &RefContext, a: &RefType, b: &RefType, cfg: &OracleConfig) -> Result<Verdict, RefineError> {
    wf(defs, ctx, a)?;
    wf(defs, ctx, b)?;
    let mut c = Checker { defs, cfg, trace: Vec::new(), verdict: Verdict::VerifiedSyntactic };
    c.subtype(ctx, a, b)?;
    Ok(c.verdict)
}

/// `Γ̇ ⊢ T : τ̇`. The verdict is the weakest one met along the derivation.
pub fn check_refined(
    defs: &Defs,
    ctx: &RefContext,
    term: &CsTerm,
    ty: &RefType,
    cfg: &OracleConfig,
) -> Result<CheckReport, RefineError> {
    let env = wf_context(defs, ctx)?;
    wf(defs, ctx, ty)?;
    cs_check(&defs.decls, &env, term, &ty.skeleton(), CsTypeOptions { k_is_real: true })
        .map_err(|e| RefineError::SkeletonMismatch(e.to_string()))?;
    let mut c = Checker { defs, cfg, trace: Vec::new(), verdict: Verdict::VerifiedSyntactic };
    c.check(ctx, term, ty)?;
    Ok(CheckReport { verdict: c.verdict, trace: c.trace, seed: cfg.seed, samples: cfg.samples })
}
