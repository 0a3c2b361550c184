//! The cost-structure language: an A-normal target language with collapse
//! operators, real constants, cost addition and probabilistic barycentric
//! sums.

use std::collections::BTreeSet;
use std::fmt;

use crate::linalg::QState;
use crate::source::fresh_name;
use crate::syntax::{fmt_ket, fmt_real};

pub mod denote;
pub mod parse;
pub mod typecheck;

pub use denote::{denote, denote_closed_cost, ClosedCost, Den, Denoter, Env};
pub use parse::{parse_cs_program, parse_cs_term, parse_cs_type, CsInput, CsProgram};
pub use typecheck::{cs_check, cs_synth, CsTypeError, CsTypeErrorKind, CsTypeOptions};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CsType {
    Basic(String),
    RInf,
    K,
    Arrow(Box<CsType>, Box<CsType>),
}

impl CsType {
    pub fn basic(name: &str) -> Self {
        CsType::Basic(name.into())
    }

    pub fn arrow(a: CsType, b: CsType) -> Self {
        CsType::Arrow(Box::new(a), Box::new(b))
    }

    /// `K | S => F`.
    pub fn is_functional(&self) -> bool {
        match self {
            CsType::K => true,
            CsType::Arrow(_, b) => b.is_functional(),
            _ => false,
        }
    }
}

impl fmt::Display for CsType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CsType::Basic(b) => f.write_str(b),
            CsType::RInf => f.write_str("R+inf"),
            CsType::K => f.write_str("K"),
            CsType::Arrow(a, b) => {
                if matches!(**a, CsType::Arrow(..)) {
                    write!(f, "({a}) => {b}")
                } else {
                    write!(f, "{a} => {b}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsArm {
    pub cons: String,
    pub params: Vec<String>,
    pub body: CsTerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsLetrec {
    pub fun: String,
    pub param: String,
    pub ann: Option<CsType>,
    pub body: CsTerm,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CsTerm {
    Var(String),
    Lam(String, Box<CsTerm>),
    /// Operand must be a value.
    App(Box<CsTerm>, Box<CsTerm>),
    Ket(QState<f64>),
    Gate(String, Box<CsTerm>),
    Tensor(Box<CsTerm>, Box<CsTerm>),
    /// Post-measurement state for outcome `b`.
    Collapse(u8, Box<CsTerm>),
    Cons(String, Vec<CsTerm>),
    Case(Box<CsTerm>, Vec<CsArm>, Option<(String, Box<CsTerm>)>),
    Letrec(Box<CsLetrec>),
    Real(f64),
    CAdd(Box<CsTerm>, Box<CsTerm>),
    /// `T0 (+p0 V) T1`: weight `p0(V)` on `T0`.
    Bary(Box<CsTerm>, Box<CsTerm>, Box<CsTerm>),
}

impl CsTerm {
    pub fn var(x: &str) -> Self {
        CsTerm::Var(x.into())
    }

    pub fn lam(x: &str, t: CsTerm) -> Self {
        CsTerm::Lam(x.into(), Box::new(t))
    }

    pub fn app(f: CsTerm, v: CsTerm) -> Self {
        CsTerm::App(Box::new(f), Box::new(v))
    }

    pub fn cadd(a: CsTerm, b: CsTerm) -> Self {
        CsTerm::CAdd(Box::new(a), Box::new(b))
    }

    pub fn bary(a: CsTerm, v: CsTerm, b: CsTerm) -> Self {
        CsTerm::Bary(Box::new(a), Box::new(v), Box::new(b))
    }

    pub fn is_value(&self) -> bool {
        match self {
            CsTerm::Var(_) | CsTerm::Lam(..) | CsTerm::Ket(_) | CsTerm::Letrec(_) | CsTerm::Real(_) => true,
            CsTerm::Gate(_, v) | CsTerm::Collapse(_, v) => v.is_value(),
            CsTerm::Tensor(a, b) => a.is_value() && b.is_value(),
            CsTerm::Cons(_, vs) => vs.iter().all(CsTerm::is_value),
            _ => false,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut Vec::new(), &mut out);
        out
    }

    /// Every variable name occurring in the term, bound or free.
    pub fn all_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            CsTerm::Var(x) => {
                out.insert(x.clone());
            }
            CsTerm::Lam(x, t) => {
                out.insert(x.clone());
                t.all_vars(out);
            }
            CsTerm::Letrec(l) => {
                out.insert(l.fun.clone());
                out.insert(l.param.clone());
                l.body.all_vars(out);
            }
            CsTerm::Case(s, arms, def) => {
                s.all_vars(out);
                for a in arms {
                    out.extend(a.params.iter().cloned());
                    a.body.all_vars(out);
                }
                if let Some((y, t)) = def {
                    out.insert(y.clone());
                    t.all_vars(out);
                }
            }
            _ => self.children().into_iter().for_each(|c| c.all_vars(out)),
        }
    }

    /// Direct subterms that bind nothing new.
    fn children(&self) -> Vec<&CsTerm> {
        match self {
            CsTerm::Var(_) | CsTerm::Ket(_) | CsTerm::Real(_) | CsTerm::Lam(..) | CsTerm::Letrec(_) | CsTerm::Case(..) => {
                vec![]
            }
            CsTerm::App(a, b) | CsTerm::Tensor(a, b) | CsTerm::CAdd(a, b) => vec![a, b],
            CsTerm::Gate(_, a) | CsTerm::Collapse(_, a) => vec![a],
            CsTerm::Cons(_, vs) => vs.iter().collect(),
            CsTerm::Bary(a, v, b) => vec![a, v, b],
        }
    }

    fn collect_fv(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            CsTerm::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            CsTerm::Lam(x, t) => {
                bound.push(x.clone());
                t.collect_fv(bound, out);
                bound.pop();
            }
            CsTerm::Letrec(l) => {
                bound.push(l.fun.clone());
                bound.push(l.param.clone());
                l.body.collect_fv(bound, out);
                bound.truncate(bound.len() - 2);
            }
            CsTerm::Case(s, arms, def) => {
                s.collect_fv(bound, out);
                for a in arms {
                    let n = bound.len();
                    bound.extend(a.params.iter().cloned());
                    a.body.collect_fv(bound, out);
                    bound.truncate(n);
                }
                if let Some((y, t)) = def {
                    bound.push(y.clone());
                    t.collect_fv(bound, out);
                    bound.pop();
                }
            }
            _ => self.children().into_iter().for_each(|c| c.collect_fv(bound, out)),
        }
    }

    /// Capture-avoiding simultaneous substitution.
    pub fn subst(&self, sub: &[(String, CsTerm)]) -> CsTerm {
        if sub.is_empty() {
            return self.clone();
        }
        let avoid: BTreeSet<String> = sub.iter().flat_map(|(_, v)| v.free_vars()).collect();
        self.subst_in(sub, &avoid)
    }

    fn subst_in(&self, sub: &[(String, CsTerm)], avoid: &BTreeSet<String>) -> CsTerm {
        let go = |t: &CsTerm| Box::new(t.subst_in(sub, avoid));
        match self {
            CsTerm::Var(x) => sub.iter().rev().find(|(y, _)| y == x).map(|(_, v)| v.clone()).unwrap_or_else(|| self.clone()),
            CsTerm::Lam(x, t) => {
                let (names, body) = bind_under(std::slice::from_ref(x), t, sub, avoid);
                CsTerm::Lam(names[0].clone(), Box::new(body))
            }
            CsTerm::Letrec(l) => {
                let (names, body) = bind_under(&[l.fun.clone(), l.param.clone()], &l.body, sub, avoid);
                CsTerm::Letrec(Box::new(CsLetrec { fun: names[0].clone(), param: names[1].clone(), ann: l.ann.clone(), body }))
            }
            CsTerm::Case(s, arms, def) => {
                let arms = arms
                    .iter()
                    .map(|a| {
                        let (params, body) = bind_under(&a.params, &a.body, sub, avoid);
                        CsArm { cons: a.cons.clone(), params, body }
                    })
                    .collect();
                let def = def.as_ref().map(|(y, t)| {
                    let (names, body) = bind_under(std::slice::from_ref(y), t, sub, avoid);
                    (names[0].clone(), Box::new(body))
                });
                CsTerm::Case(go(s), arms, def)
            }
            CsTerm::App(a, b) => CsTerm::App(go(a), go(b)),
            CsTerm::Tensor(a, b) => CsTerm::Tensor(go(a), go(b)),
            CsTerm::CAdd(a, b) => CsTerm::CAdd(go(a), go(b)),
            CsTerm::Bary(a, v, b) => CsTerm::Bary(go(a), go(v), go(b)),
            CsTerm::Gate(g, a) => CsTerm::Gate(g.clone(), go(a)),
            CsTerm::Collapse(b, a) => CsTerm::Collapse(*b, go(a)),
            CsTerm::Cons(c, vs) => CsTerm::Cons(c.clone(), vs.iter().map(|v| v.subst_in(sub, avoid)).collect()),
            CsTerm::Ket(_) | CsTerm::Real(_) => self.clone(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            CsTerm::Lam(_, t) => 1 + t.size(),
            CsTerm::Letrec(l) => 1 + l.body.size(),
            CsTerm::Case(s, arms, d) => {
                1 + s.size() + arms.iter().map(|a| a.body.size()).sum::<usize>() + d.as_ref().map_or(0, |(_, t)| t.size())
            }
            _ => 1 + self.children().into_iter().map(CsTerm::size).sum::<usize>(),
        }
    }
}

fn bind_under(
    binders: &[String],
    body: &CsTerm,
    sub: &[(String, CsTerm)],
    avoid: &BTreeSet<String>,
) -> (Vec<String>, CsTerm) {
    let inner: Vec<(String, CsTerm)> = sub.iter().filter(|(x, _)| !binders.contains(x)).cloned().collect();
    if inner.is_empty() {
        return (binders.to_vec(), body.clone());
    }
    let body_fv = body.free_vars();
    let mut names = Vec::with_capacity(binders.len());
    let mut renames = Vec::new();
    for b in binders {
        if avoid.contains(b) {
            let fresh = fresh_name(b, |n| {
                avoid.contains(n) || body_fv.contains(n) || binders.iter().any(|x| x == n) || sub.iter().any(|(k, _)| k == n)
            });
            renames.push((b.clone(), CsTerm::Var(fresh.clone())));
            names.push(fresh);
        } else {
            names.push(b.clone());
        }
    }
    let body = if renames.is_empty() { body.clone() } else { body.subst(&renames) };
    let inner_avoid: BTreeSet<String> = inner.iter().flat_map(|(_, v)| v.free_vars()).collect();
    (names, body.subst_in(&inner, &inner_avoid))
}

/// Alpha-equivalence with kets and reals compared within `tol`.
pub fn cs_alpha_eq(a: &CsTerm, b: &CsTerm, tol: f64) -> bool {
    fn go(a: &CsTerm, b: &CsTerm, ea: &mut Vec<String>, eb: &mut Vec<String>, tol: f64) -> bool {
        let under = |ea: &mut Vec<String>, eb: &mut Vec<String>, xa: &[String], xb: &[String], s: &CsTerm, t: &CsTerm| {
            let (na, nb) = (ea.len(), eb.len());
            ea.extend(xa.iter().cloned());
            eb.extend(xb.iter().cloned());
            let r = xa.len() == xb.len() && go(s, t, ea, eb, tol);
            ea.truncate(na);
            eb.truncate(nb);
            r
        };
        match (a, b) {
            (CsTerm::Var(x), CsTerm::Var(y)) => match (ea.iter().rposition(|n| n == x), eb.iter().rposition(|n| n == y)) {
                (Some(i), Some(j)) => i == j,
                (None, None) => x == y,
                _ => false,
            },
            (CsTerm::Lam(x, s), CsTerm::Lam(y, t)) => under(ea, eb, std::slice::from_ref(x), std::slice::from_ref(y), s, t),
            (CsTerm::Letrec(l), CsTerm::Letrec(m)) => {
                under(ea, eb, &[l.fun.clone(), l.param.clone()], &[m.fun.clone(), m.param.clone()], &l.body, &m.body)
            }
            (CsTerm::Case(s, xs, dx), CsTerm::Case(t, ys, dy)) => {
                go(s, t, ea, eb, tol)
                    && xs.len() == ys.len()
                    && xs.iter().zip(ys).all(|(x, y)| x.cons == y.cons && under(ea, eb, &x.params, &y.params, &x.body, &y.body))
                    && match (dx, dy) {
                        (None, None) => true,
                        (Some((y, s)), Some((z, t))) => under(ea, eb, std::slice::from_ref(y), std::slice::from_ref(z), s, t),
                        _ => false,
                    }
            }
            (CsTerm::Ket(p), CsTerm::Ket(q)) => p.approx_eq(q, tol),
            (CsTerm::Real(r), CsTerm::Real(s)) => (r - s).abs() <= tol,
            (CsTerm::Gate(g, s), CsTerm::Gate(h, t)) => g == h && go(s, t, ea, eb, tol),
            (CsTerm::Collapse(b0, s), CsTerm::Collapse(b1, t)) => b0 == b1 && go(s, t, ea, eb, tol),
            (CsTerm::Cons(c, xs), CsTerm::Cons(d, ys)) => {
                c == d && xs.len() == ys.len() && xs.iter().zip(ys).all(|(s, t)| go(s, t, ea, eb, tol))
            }
            (CsTerm::App(a0, a1), CsTerm::App(b0, b1))
            | (CsTerm::Tensor(a0, a1), CsTerm::Tensor(b0, b1))
            | (CsTerm::CAdd(a0, a1), CsTerm::CAdd(b0, b1)) => go(a0, b0, ea, eb, tol) && go(a1, b1, ea, eb, tol),
            (CsTerm::Bary(a0, v, a1), CsTerm::Bary(b0, w, b1)) => {
                go(a0, b0, ea, eb, tol) && go(v, w, ea, eb, tol) && go(a1, b1, ea, eb, tol)
            }
            _ => false,
        }
    }
    go(a, b, &mut Vec::new(), &mut Vec::new(), tol)
}

// ---------------------------------------------------------------- printing

impl fmt::Display for CsTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&cs_pretty(self))
    }
}

pub fn cs_pretty(t: &CsTerm) -> String {
    let mut s = String::new();
    pp(t, Prec::Top, &mut s);
    s
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Top,
    /// Operand of a binary operator: applications allowed.
    App,
    Atom,
}

fn pp(t: &CsTerm, prec: Prec, out: &mut String) {
    let open = matches!(t, CsTerm::Lam(..) | CsTerm::Letrec(_) | CsTerm::Case(..) | CsTerm::CAdd(..) | CsTerm::Bary(..));
    // a bare nullary constructor followed by `(` would read as an argument list
    let nullary = matches!(t, CsTerm::Cons(_, vs) if vs.is_empty());
    let needs = ((open || nullary) && prec > Prec::Top)
        || (matches!(t, CsTerm::App(..) | CsTerm::Gate(..) | CsTerm::Real(_)) && prec == Prec::Atom);
    if needs {
        out.push('(');
        pp(t, Prec::Top, out);
        out.push(')');
        return;
    }
    match t {
        CsTerm::Var(x) => out.push_str(x),
        CsTerm::Lam(x, b) => {
            out.push_str(&format!("lam {x}. "));
            pp(b, Prec::Top, out);
        }
        CsTerm::App(f, v) => {
            pp(f, Prec::App, out);
            out.push(' ');
            pp(v, Prec::Atom, out);
        }
        CsTerm::Ket(k) => out.push_str(&fmt_ket(k)),
        CsTerm::Gate(g, v) => {
            out.push_str(&format!("#{g} "));
            pp(v, Prec::Atom, out);
        }
        CsTerm::Tensor(a, b) => {
            out.push_str("tensor(");
            pp(a, Prec::Top, out);
            out.push_str(", ");
            pp(b, Prec::Top, out);
            out.push(')');
        }
        CsTerm::Collapse(b, v) => {
            out.push_str(&format!("collapse{b}("));
            pp(v, Prec::Top, out);
            out.push(')');
        }
        CsTerm::Cons(c, vs) => {
            out.push_str(c);
            if !vs.is_empty() {
                out.push('(');
                for (i, v) in vs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    pp(v, Prec::Top, out);
                }
                out.push(')');
            }
        }
        CsTerm::Case(s, arms, def) => {
            out.push_str("case ");
            pp(s, Prec::Top, out);
            out.push_str(" of");
            let n = arms.len() + usize::from(def.is_some());
            for (i, a) in arms.iter().enumerate() {
                out.push_str(" | ");
                out.push_str(&a.cons);
                if !a.params.is_empty() {
                    out.push_str(&format!("({})", a.params.join(", ")));
                }
                out.push_str(" -> ");
                pp_arm_body(&a.body, i + 1 == n, out);
            }
            if let Some((y, b)) = def {
                out.push_str(&format!(" | {y} -> "));
                pp_arm_body(b, true, out);
            }
        }
        CsTerm::Letrec(l) => {
            out.push_str(&format!("letrec {} {}", l.fun, l.param));
            if let Some(ty) = &l.ann {
                out.push_str(&format!(" : {ty}"));
            }
            out.push_str(" = ");
            pp(&l.body, Prec::Top, out);
        }
        CsTerm::Real(r) => out.push_str(&format!("real {}", fmt_real(*r))),
        CsTerm::CAdd(a, b) => {
            pp(a, Prec::App, out);
            out.push_str(" +^ ");
            pp(b, Prec::Top, out);
        }
        CsTerm::Bary(a, v, b) => {
            pp(a, Prec::App, out);
            out.push_str(" (+p0 ");
            pp(v, Prec::Top, out);
            out.push_str(") ");
            pp(b, Prec::Top, out);
        }
    }
}

fn pp_arm_body(t: &CsTerm, last: bool, out: &mut String) {
    let open = matches!(t, CsTerm::Lam(..) | CsTerm::Letrec(_) | CsTerm::Case(..) | CsTerm::CAdd(..) | CsTerm::Bary(..));
    if open && !last {
        out.push('(');
        pp(t, Prec::Top, out);
        out.push(')');
    } else {
        pp(t, Prec::Top, out);
    }
}
