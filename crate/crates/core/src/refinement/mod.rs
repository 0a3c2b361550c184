//! Refinement types for cost-structure terms.
//!
//! Formulae are first-order over expressions built from variables, real
//! arithmetic, probabilities `p0`/`p1`, collapses, gates, kets,
//! constructors and user-declared candidate functions. Validity of a
//! formula under a context is decided by a seeded sampling oracle with
//! three outcomes; subtyping at base types and the typing judgement are
//! discharged through it.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::cs::CsType;
use crate::decls::Decls;
use crate::linalg::QState;
use crate::syntax::{fmt_ket, fmt_real};

mod check;
mod oracle;
mod parse;

pub use check::{
    admissible, check_refined, formula_type, subtype, wf, wf_context, Admissibility, CheckReport, RefineError,
    TraceLine,
};
pub use oracle::{
    eval_expr, eval_formula, normalize, sample_context, syntactically_valid, validity, FVal, OracleConfig, Verdict,
    Witness,
};
pub use parse::{parse_formula, parse_fexpr, parse_ref_type, parse_rty, RtyFile};

/// Which cost structure the real-valued carriers are read in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Structure {
    /// `(ℝ^{+∞}, +)`.
    RealsPlus,
    /// `([0,1], +_f)`.
    UnitForgetful,
}

impl Structure {
    pub fn cadd(self, a: f64, b: f64) -> f64 {
        match self {
            Structure::RealsPlus => a + b,
            Structure::UnitForgetful => b,
        }
    }

    pub fn top(self) -> f64 {
        match self {
            Structure::RealsPlus => f64::INFINITY,
            Structure::UnitForgetful => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    CAdd,
}

impl Op {
    fn prec(self) -> u8 {
        match self {
            Op::Add | Op::Sub | Op::CAdd => 1,
            Op::Mul | Op::Div => 2,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::CAdd => "+^",
        }
    }
}

/// Expressions appearing as predicate arguments.
#[derive(Debug, Clone, PartialEq)]
pub enum FExpr {
    Var(String),
    Num(f64),
    Ket(QState<f64>),
    Bin(Op, Box<FExpr>, Box<FExpr>),
    /// `bary(e0, V, e1)`: `e0` weighted by `p0(V)`.
    Bary(Box<FExpr>, Box<FExpr>, Box<FExpr>),
    Prob(u8, Box<FExpr>),
    Collapse(u8, Box<FExpr>),
    Gate(String, Box<FExpr>),
    Tensor(Box<FExpr>, Box<FExpr>),
    Cons(String, Vec<FExpr>),
    /// Candidate function or function-valued variable applied to arguments.
    Call(String, Vec<FExpr>),
}

impl FExpr {
    pub fn var(x: &str) -> Self {
        FExpr::Var(x.to_string())
    }

    pub fn bin(op: Op, a: FExpr, b: FExpr) -> Self {
        FExpr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn children(&self) -> Vec<&FExpr> {
        match self {
            FExpr::Var(_) | FExpr::Num(_) | FExpr::Ket(_) => vec![],
            FExpr::Bin(_, a, b) | FExpr::Tensor(a, b) => vec![a, b],
            FExpr::Bary(a, v, b) => vec![a, v, b],
            FExpr::Prob(_, e) | FExpr::Collapse(_, e) | FExpr::Gate(_, e) => vec![e],
            FExpr::Cons(_, es) | FExpr::Call(_, es) => es.iter().collect(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut out);
        out
    }

    fn collect_fv(&self, out: &mut BTreeSet<String>) {
        match self {
            FExpr::Var(x) => {
                out.insert(x.clone());
            }
            FExpr::Call(f, es) => {
                out.insert(f.clone());
                es.iter().for_each(|e| e.collect_fv(out));
            }
            _ => self.children().into_iter().for_each(|e| e.collect_fv(out)),
        }
    }

    /// `self[e/x]`. Expressions have no binders. A call head is replaced
    /// only when `e` is a variable.
    pub fn subst(&self, x: &str, e: &FExpr) -> FExpr {
        let s = |a: &FExpr| Box::new(a.subst(x, e));
        match self {
            FExpr::Var(y) if y == x => e.clone(),
            FExpr::Var(_) | FExpr::Num(_) | FExpr::Ket(_) => self.clone(),
            FExpr::Bin(op, a, b) => FExpr::Bin(*op, s(a), s(b)),
            FExpr::Bary(a, v, b) => FExpr::Bary(s(a), s(v), s(b)),
            FExpr::Prob(i, a) => FExpr::Prob(*i, s(a)),
            FExpr::Collapse(i, a) => FExpr::Collapse(*i, s(a)),
            FExpr::Gate(g, a) => FExpr::Gate(g.clone(), s(a)),
            FExpr::Tensor(a, b) => FExpr::Tensor(s(a), s(b)),
            FExpr::Cons(c, es) => FExpr::Cons(c.clone(), es.iter().map(|a| a.subst(x, e)).collect()),
            FExpr::Call(f, es) => {
                let head = match e {
                    FExpr::Var(g) if f == x => g.clone(),
                    _ => f.clone(),
                };
                FExpr::Call(head, es.iter().map(|a| a.subst(x, e)).collect())
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            FExpr::Bin(op, ..) => op.prec(),
            _ => 3,
        }
    }
}

fn fmt_args(f: &mut fmt::Formatter<'_>, es: &[FExpr]) -> fmt::Result {
    for (i, e) in es.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{e}")?;
    }
    Ok(())
}

impl fmt::Display for FExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FExpr::Var(x) => f.write_str(x),
            FExpr::Num(r) if r.is_infinite() => f.write_str("inf"),
            FExpr::Num(r) => f.write_str(&fmt_real(*r)),
            FExpr::Ket(st) => f.write_str(&fmt_ket(st)),
            FExpr::Bin(op, a, b) => {
                if a.prec() < op.prec() {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if b.prec() <= op.prec() {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            FExpr::Bary(a, v, b) => write!(f, "bary({a}, {v}, {b})"),
            FExpr::Prob(i, e) => write!(f, "p{i}({e})"),
            FExpr::Collapse(i, e) => write!(f, "collapse{i}({e})"),
            FExpr::Gate(g, e) => write!(f, "{g}({e})"),
            FExpr::Tensor(a, b) => write!(f, "tensor({a}, {b})"),
            FExpr::Cons(c, es) => {
                f.write_str(c)?;
                if es.is_empty() && !c.starts_with(|ch: char| ch.is_ascii_digit()) {
                    return Ok(());
                }
                f.write_str("(")?;
                fmt_args(f, es)?;
                f.write_str(")")
            }
            FExpr::Call(g, es) => {
                write!(f, "{g}(")?;
                fmt_args(f, es)?;
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Eq,
    Ne,
    Le,
    /// `⊑`, which is `≤` on every real carrier.
    Sqsub,
}

impl Rel {
    fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Ne => "!=",
            Rel::Le => "<=",
            Rel::Sqsub => "<<=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    False,
    Atom(Rel, FExpr, FExpr),
    /// The head constructor of the expression is the named one.
    IsCons(String, FExpr),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(String, CsType, Box<Formula>),
    Exists(String, CsType, Box<Formula>),
}

impl Formula {
    pub fn atom(rel: Rel, a: FExpr, b: FExpr) -> Self {
        Formula::Atom(rel, a, b)
    }

    pub fn not(a: Formula) -> Self {
        Formula::Not(Box::new(a))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    /// Conjunction that drops `true` operands.
    pub fn and(a: Formula, b: Formula) -> Self {
        match (a, b) {
            (Formula::True, b) => b,
            (a, Formula::True) => a,
            (a, b) => Formula::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn conj(parts: impl IntoIterator<Item = Formula>) -> Self {
        parts.into_iter().fold(Formula::True, Formula::and)
    }

    pub fn forall(x: &str, ty: CsType, body: Formula) -> Self {
        Formula::Forall(x.to_string(), ty, Box::new(body))
    }

    pub fn exists(x: &str, ty: CsType, body: Formula) -> Self {
        Formula::Exists(x.to_string(), ty, Box::new(body))
    }

    /// Top-level conjuncts.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            Formula::True => vec![],
            _ => vec![self],
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            Formula::True | Formula::False => BTreeSet::new(),
            Formula::Atom(_, a, b) => {
                let mut s = a.free_vars();
                s.extend(b.free_vars());
                s
            }
            Formula::IsCons(_, e) => e.free_vars(),
            Formula::Not(a) => a.free_vars(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                let mut s = a.free_vars();
                s.extend(b.free_vars());
                s
            }
            Formula::Forall(x, _, a) | Formula::Exists(x, _, a) => {
                let mut s = a.free_vars();
                s.remove(x);
                s
            }
        }
    }

    /// Every variable occurring in the formula, bound or free.
    pub fn all_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(_, a, b) => {
                out.extend(a.free_vars());
                out.extend(b.free_vars());
            }
            Formula::IsCons(_, e) => out.extend(e.free_vars()),
            Formula::Not(a) => a.all_vars(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.all_vars(out);
                b.all_vars(out);
            }
            Formula::Forall(x, _, a) | Formula::Exists(x, _, a) => {
                out.insert(x.clone());
                a.all_vars(out);
            }
        }
    }

    /// Capture-avoiding `self[e/x]`.
    pub fn subst(&self, x: &str, e: &FExpr) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Atom(r, a, b) => Formula::Atom(*r, a.subst(x, e), b.subst(x, e)),
            Formula::IsCons(c, a) => Formula::IsCons(c.clone(), a.subst(x, e)),
            Formula::Not(a) => Formula::not(a.subst(x, e)),
            Formula::And(a, b) => Formula::And(Box::new(a.subst(x, e)), Box::new(b.subst(x, e))),
            Formula::Or(a, b) => Formula::Or(Box::new(a.subst(x, e)), Box::new(b.subst(x, e))),
            Formula::Implies(a, b) => Formula::implies(a.subst(x, e), b.subst(x, e)),
            Formula::Forall(y, ty, body) | Formula::Exists(y, ty, body) => {
                let is_all = matches!(self, Formula::Forall(..));
                if y == x {
                    return self.clone();
                }
                let efv = e.free_vars();
                let (y2, body2) = if efv.contains(y) {
                    let mut avoid = efv;
                    body.all_vars(&mut avoid);
                    avoid.insert(x.to_string());
                    let fresh = fresh_name(y, &avoid);
                    (fresh.clone(), body.subst(y, &FExpr::Var(fresh)))
                } else {
                    (y.clone(), (**body).clone())
                };
                let b = Box::new(body2.subst(x, e));
                if is_all {
                    Formula::Forall(y2, ty.clone(), b)
                } else {
                    Formula::Exists(y2, ty.clone(), b)
                }
            }
        }
    }

    fn prec(&self) -> u8 {
        match self {
            Formula::Forall(..) | Formula::Exists(..) => 0,
            Formula::Implies(..) => 1,
            Formula::Or(..) => 2,
            Formula::And(..) => 3,
            Formula::Not(..) => 4,
            _ => 5,
        }
    }
}

/// Alpha-equivalence of formulae.
pub fn formula_alpha_eq(a: &Formula, b: &Formula) -> bool {
    canonical(a, 0) == canonical(b, 0)
}

/// Bound variables renamed to `#depth`, which no parsed name can clash with.
fn canonical(phi: &Formula, depth: usize) -> Formula {
    match phi {
        Formula::True | Formula::False | Formula::Atom(..) | Formula::IsCons(..) => phi.clone(),
        Formula::Not(a) => Formula::not(canonical(a, depth)),
        Formula::And(a, b) => Formula::And(Box::new(canonical(a, depth)), Box::new(canonical(b, depth))),
        Formula::Or(a, b) => Formula::Or(Box::new(canonical(a, depth)), Box::new(canonical(b, depth))),
        Formula::Implies(a, b) => Formula::implies(canonical(a, depth), canonical(b, depth)),
        Formula::Forall(x, ty, body) | Formula::Exists(x, ty, body) => {
            let name = format!("#{depth}");
            let body = Box::new(canonical(&body.subst(x, &FExpr::Var(name.clone())), depth + 1));
            if matches!(phi, Formula::Forall(..)) {
                Formula::Forall(name, ty.clone(), body)
            } else {
                Formula::Exists(name, ty.clone(), body)
            }
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |f: &mut fmt::Formatter<'_>, g: &Formula, min: u8| {
            if g.prec() < min {
                write!(f, "({g})")
            } else {
                write!(f, "{g}")
            }
        };
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(r, a, b) => write!(f, "{a} {} {b}", r.symbol()),
            Formula::IsCons(c, e) => write!(f, "is({c}, {e})"),
            Formula::Not(a) => {
                f.write_str("not ")?;
                sub(f, a, 5)
            }
            Formula::And(a, b) => {
                sub(f, a, 4)?;
                f.write_str(" /\\ ")?;
                sub(f, b, 3)
            }
            Formula::Or(a, b) => {
                sub(f, a, 3)?;
                f.write_str(" \\/ ")?;
                sub(f, b, 2)
            }
            Formula::Implies(a, b) => {
                sub(f, a, 2)?;
                f.write_str(" => ")?;
                sub(f, b, 1)
            }
            Formula::Forall(x, ty, a) => write!(f, "forall {x} : {ty}. {a}"),
            Formula::Exists(x, ty, a) => write!(f, "exists {x} : {ty}. {a}"),
        }
    }
}

/// `{Z : I | φ}`, `(X : τ) ⇒ τ'` and `∀X : τ. τ'`.
#[derive(Debug, Clone, PartialEq)]
pub enum RefType {
    Base { base: CsType, z: String, phi: Formula },
    Arrow { x: String, dom: Box<RefType>, cod: Box<RefType> },
    Forall { x: String, bound: Box<RefType>, body: Box<RefType> },
}

impl RefType {
    pub fn base(base: CsType, z: &str, phi: Formula) -> Self {
        RefType::Base { base, z: z.to_string(), phi }
    }

    /// `{Z : I | true}`.
    pub fn plain(base: CsType) -> Self {
        RefType::Base { base, z: "Z".into(), phi: Formula::True }
    }

    pub fn arrow(x: &str, dom: RefType, cod: RefType) -> Self {
        RefType::Arrow { x: x.to_string(), dom: Box::new(dom), cod: Box::new(cod) }
    }

    pub fn forall(x: &str, bound: RefType, body: RefType) -> Self {
        RefType::Forall { x: x.to_string(), bound: Box::new(bound), body: Box::new(body) }
    }

    /// The simple type obtained by erasing refinements and quantifiers.
    pub fn skeleton(&self) -> CsType {
        match self {
            RefType::Base { base, .. } => base.clone(),
            RefType::Arrow { dom, cod, .. } => CsType::arrow(dom.skeleton(), cod.skeleton()),
            RefType::Forall { body, .. } => body.skeleton(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            RefType::Base { z, phi, .. } => {
                let mut s = phi.free_vars();
                s.remove(z);
                s
            }
            RefType::Arrow { x, dom, cod } | RefType::Forall { x, bound: dom, body: cod } => {
                let mut s = cod.free_vars();
                s.remove(x);
                s.extend(dom.free_vars());
                s
            }
        }
    }

    fn all_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            RefType::Base { z, phi, .. } => {
                out.insert(z.clone());
                phi.all_vars(out);
            }
            RefType::Arrow { x, dom, cod } | RefType::Forall { x, bound: dom, body: cod } => {
                out.insert(x.clone());
                dom.all_vars(out);
                cod.all_vars(out);
            }
        }
    }

    /// Capture-avoiding `self[e/x]`.
    pub fn subst(&self, x: &str, e: &FExpr) -> RefType {
        let efv = e.free_vars();
        match self {
            RefType::Base { base, z, phi } => {
                if z == x {
                    return self.clone();
                }
                let (z2, phi2) = if efv.contains(z) {
                    let mut avoid = efv.clone();
                    phi.all_vars(&mut avoid);
                    avoid.insert(x.to_string());
                    let fresh = fresh_name(z, &avoid);
                    (fresh.clone(), phi.subst(z, &FExpr::Var(fresh)))
                } else {
                    (z.clone(), phi.clone())
                };
                RefType::Base { base: base.clone(), z: z2, phi: phi2.subst(x, e) }
            }
            RefType::Arrow { x: y, dom, cod } | RefType::Forall { x: y, bound: dom, body: cod } => {
                let dom2 = dom.subst(x, e);
                let cod2 = if y == x {
                    (**cod).clone()
                } else if efv.contains(y) {
                    let mut avoid = efv.clone();
                    cod.all_vars(&mut avoid);
                    avoid.insert(x.to_string());
                    let fresh = fresh_name(y, &avoid);
                    let renamed = cod.subst(y, &FExpr::Var(fresh.clone()));
                    return self.rebuild(&fresh, dom2, renamed.subst(x, e));
                } else {
                    cod.subst(x, e)
                };
                self.rebuild(y, dom2, cod2)
            }
        }
    }

    fn rebuild(&self, y: &str, dom: RefType, cod: RefType) -> RefType {
        match self {
            RefType::Forall { .. } => RefType::forall(y, dom, cod),
            _ => RefType::arrow(y, dom, cod),
        }
    }
}

impl fmt::Display for RefType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RefType::Base { base, phi: Formula::True, .. } => write!(f, "{base}"),
            RefType::Base { base, z, phi } => write!(f, "{{{z} : {base} | {phi}}}"),
            RefType::Arrow { x, dom, cod } => write!(f, "({x} : {dom}) => {cod}"),
            RefType::Forall { x, bound, body } => write!(f, "forall {x} : {bound}. {body}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CtxEntry {
    Bind(String, RefType),
    Fact(Formula),
}

/// Ordered bindings and path formulae.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RefContext {
    pub entries: Vec<CtxEntry>,
}

impl RefContext {
    pub fn new() -> Self {
        RefContext::default()
    }

    pub fn bind(&self, x: &str, t: RefType) -> Self {
        let mut c = self.clone();
        c.entries.push(CtxEntry::Bind(x.to_string(), t));
        c
    }

    pub fn fact(&self, phi: Formula) -> Self {
        let mut c = self.clone();
        c.entries.push(CtxEntry::Fact(phi));
        c
    }

    pub fn lookup(&self, x: &str) -> Option<&RefType> {
        self.entries.iter().rev().find_map(|e| match e {
            CtxEntry::Bind(y, t) if y == x => Some(t),
            _ => None,
        })
    }

    pub fn vars(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                CtxEntry::Bind(x, _) => Some(x.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Variables that must be avoided by fresh binders.
    pub fn names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for e in &self.entries {
            match e {
                CtxEntry::Bind(x, t) => {
                    out.insert(x.clone());
                    t.all_vars(&mut out);
                }
                CtxEntry::Fact(phi) => phi.all_vars(&mut out),
            }
        }
        out
    }
}

impl fmt::Display for RefContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.entries.is_empty() {
            return f.write_str(".");
        }
        for (i, e) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match e {
                CtxEntry::Bind(x, t) => write!(f, "{x} : {t}")?,
                CtxEntry::Fact(phi) => write!(f, "[{phi}]")?,
            }
        }
        Ok(())
    }
}

/// A user-declared function usable inside formulae and as an instance of
/// function-typed quantifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub name: String,
    pub params: Vec<(String, CsType)>,
    pub ret: CsType,
    pub body: FExpr,
}

impl Candidate {
    pub fn skeleton(&self) -> CsType {
        self.params.iter().rev().fold(self.ret.clone(), |acc, (_, t)| CsType::arrow(t.clone(), acc))
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ps: Vec<String> = self.params.iter().map(|(x, t)| format!("{x} : {t}")).collect();
        write!(f, "candidate {}({}) : {} = {}", self.name, ps.join(", "), self.ret, self.body)
    }
}

/// Everything formula evaluation depends on besides the valuation.
#[derive(Debug, Clone)]
pub struct Defs {
    pub decls: Decls,
    pub candidates: Vec<Candidate>,
    pub structure: Structure,
}

impl Defs {
    pub fn new(decls: Decls, structure: Structure) -> Self {
        Defs { decls, candidates: Vec::new(), structure }
    }

    pub fn candidate(&self, name: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.name == name)
    }
}

/// `base` followed by primes until it avoids `avoid`.
pub fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit() || c == '\'');
    let stem = if stem.is_empty() { "Z" } else { stem };
    (0..).map(|i| format!("{stem}{i}")).find(|n| !avoid.contains(n)).expect("names are unbounded")
}

/// Expression for a cost-structure value, if it has one.
pub fn value_to_fexpr(v: &crate::cs::CsTerm) -> Option<FExpr> {
    use crate::cs::CsTerm;
    Some(match v {
        CsTerm::Var(x) => FExpr::Var(x.clone()),
        CsTerm::Ket(st) => FExpr::Ket(st.clone()),
        CsTerm::Real(r) => FExpr::Num(*r),
        CsTerm::Gate(g, a) => FExpr::Gate(g.clone(), Box::new(value_to_fexpr(a)?)),
        CsTerm::Collapse(b, a) => FExpr::Collapse(*b, Box::new(value_to_fexpr(a)?)),
        CsTerm::Tensor(a, b) => FExpr::Tensor(Box::new(value_to_fexpr(a)?), Box::new(value_to_fexpr(b)?)),
        CsTerm::Cons(c, args) => FExpr::Cons(c.clone(), args.iter().map(value_to_fexpr).collect::<Option<_>>()?),
        _ => return None,
    })
}
