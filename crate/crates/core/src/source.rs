//! The quantum source language: terms, types, `.aql` parser and printer.

use std::collections::BTreeSet;
use std::fmt;

use crate::decls::Decls;
use crate::linalg::QState;
use crate::syntax::{fmt_ket, Cursor, ParseError, Pos, Tok};

#[derive(Debug, Clone, PartialEq)]
pub enum SType {
    Basic(String),
    /// `T -o T'`
    Lin(Box<SType>, Box<SType>),
    /// `C => T`
    Exp(Box<SType>, Box<SType>),
}

impl SType {
    pub fn basic(name: &str) -> Self {
        SType::Basic(name.into())
    }

    pub fn lin(a: SType, b: SType) -> Self {
        SType::Lin(Box::new(a), Box::new(b))
    }

    pub fn exp(a: SType, b: SType) -> Self {
        SType::Exp(Box::new(a), Box::new(b))
    }

    pub fn is_arrow(&self) -> bool {
        !matches!(self, SType::Basic(_))
    }

    /// Classical basic types and all arrows.
    pub fn is_duplicable(&self, decls: &Decls) -> bool {
        match self {
            SType::Basic(b) => decls.is_quantum(b) == Some(false),
            _ => true,
        }
    }
}

impl fmt::Display for SType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SType::Basic(b) => write!(f, "{b}"),
            SType::Lin(a, b) | SType::Exp(a, b) => {
                let arrow = if matches!(self, SType::Lin(..)) { "-o" } else { "=>" };
                if a.is_arrow() {
                    write!(f, "({a}) {arrow} {b}")
                } else {
                    write!(f, "{a} {arrow} {b}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub cons: String,
    pub classical: Vec<String>,
    pub quantum: Vec<String>,
    pub body: Term,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Letrec {
    pub fun: String,
    pub param: String,
    pub ann: Option<SType>,
    pub body: Term,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Var(String),
    Lam(String, Box<Term>),
    App(Box<Term>, Box<Term>),
    Ket(QState<f64>),
    Gate(String, Box<Term>),
    Meas(Box<Term>),
    Tensor(Box<Term>, Box<Term>),
    /// `c(classical; quantum)`
    Cons(String, Vec<Term>, Vec<Term>),
    /// Constructor arms tried in order, then the optional default binder.
    Case(Box<Term>, Vec<Arm>, Option<(String, Box<Term>)>),
    Letrec(Box<Letrec>),
    Tick(Box<Term>),
}

impl Term {
    pub fn var(x: &str) -> Self {
        Term::Var(x.into())
    }

    pub fn lam(x: &str, t: Term) -> Self {
        Term::Lam(x.into(), Box::new(t))
    }

    pub fn app(f: Term, a: Term) -> Self {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn is_value(&self) -> bool {
        match self {
            Term::Var(_) | Term::Lam(..) | Term::Ket(_) | Term::Letrec(_) => true,
            Term::Cons(_, c, q) => c.iter().chain(q).all(Term::is_value),
            _ => false,
        }
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_fv(&mut Vec::new(), &mut out);
        out
    }

    fn collect_fv(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Term::Lam(x, t) => {
                bound.push(x.clone());
                t.collect_fv(bound, out);
                bound.pop();
            }
            Term::App(a, b) | Term::Tensor(a, b) => {
                a.collect_fv(bound, out);
                b.collect_fv(bound, out);
            }
            Term::Ket(_) => {}
            Term::Gate(_, t) | Term::Meas(t) | Term::Tick(t) => t.collect_fv(bound, out),
            Term::Cons(_, c, q) => {
                for t in c.iter().chain(q) {
                    t.collect_fv(bound, out);
                }
            }
            Term::Case(s, arms, def) => {
                s.collect_fv(bound, out);
                for arm in arms {
                    let n = bound.len();
                    bound.extend(arm.classical.iter().chain(&arm.quantum).cloned());
                    arm.body.collect_fv(bound, out);
                    bound.truncate(n);
                }
                if let Some((y, t)) = def {
                    bound.push(y.clone());
                    t.collect_fv(bound, out);
                    bound.pop();
                }
            }
            Term::Letrec(l) => {
                bound.push(l.fun.clone());
                bound.push(l.param.clone());
                l.body.collect_fv(bound, out);
                bound.pop();
                bound.pop();
            }
        }
    }

    /// Capture-avoiding simultaneous substitution `t[v⃗/x⃗]`.
    pub fn subst(&self, sub: &[(String, Term)]) -> Term {
        if sub.is_empty() {
            return self.clone();
        }
        let avoid: BTreeSet<String> = sub.iter().flat_map(|(_, v)| v.free_vars()).collect();
        self.subst_in(sub, &avoid)
    }

    fn subst_in(&self, sub: &[(String, Term)], avoid: &BTreeSet<String>) -> Term {
        match self {
            Term::Var(x) => sub.iter().rev().find(|(y, _)| y == x).map(|(_, v)| v.clone()).unwrap_or_else(|| self.clone()),
            Term::Lam(x, t) => {
                let (names, body) = self.bind_under(std::slice::from_ref(x), t, sub, avoid);
                Term::Lam(names.into_iter().next().expect("one binder"), Box::new(body))
            }
            Term::App(a, b) => Term::App(Box::new(a.subst_in(sub, avoid)), Box::new(b.subst_in(sub, avoid))),
            Term::Tensor(a, b) => Term::Tensor(Box::new(a.subst_in(sub, avoid)), Box::new(b.subst_in(sub, avoid))),
            Term::Ket(_) => self.clone(),
            Term::Gate(g, t) => Term::Gate(g.clone(), Box::new(t.subst_in(sub, avoid))),
            Term::Meas(t) => Term::Meas(Box::new(t.subst_in(sub, avoid))),
            Term::Tick(t) => Term::Tick(Box::new(t.subst_in(sub, avoid))),
            Term::Cons(c, cl, qu) => Term::Cons(
                c.clone(),
                cl.iter().map(|t| t.subst_in(sub, avoid)).collect(),
                qu.iter().map(|t| t.subst_in(sub, avoid)).collect(),
            ),
            Term::Case(s, arms, def) => {
                let arms = arms
                    .iter()
                    .map(|arm| {
                        let binders: Vec<String> = arm.classical.iter().chain(&arm.quantum).cloned().collect();
                        let (names, body) = self.bind_under(&binders, &arm.body, sub, avoid);
                        let (cl, qu) = names.split_at(arm.classical.len());
                        Arm { cons: arm.cons.clone(), classical: cl.to_vec(), quantum: qu.to_vec(), body }
                    })
                    .collect();
                let def = def.as_ref().map(|(y, t)| {
                    let (names, body) = self.bind_under(std::slice::from_ref(y), t, sub, avoid);
                    (names.into_iter().next().expect("one binder"), Box::new(body))
                });
                Term::Case(Box::new(s.subst_in(sub, avoid)), arms, def)
            }
            Term::Letrec(l) => {
                let (names, body) = self.bind_under(&[l.fun.clone(), l.param.clone()], &l.body, sub, avoid);
                Term::Letrec(Box::new(Letrec {
                    fun: names[0].clone(),
                    param: names[1].clone(),
                    ann: l.ann.clone(),
                    body,
                }))
            }
        }
    }

    /// Pushes a substitution under binders, renaming those that would capture.
    fn bind_under(
        &self,
        binders: &[String],
        body: &Term,
        sub: &[(String, Term)],
        avoid: &BTreeSet<String>,
    ) -> (Vec<String>, Term) {
        let inner: Vec<(String, Term)> = sub.iter().filter(|(x, _)| !binders.contains(x)).cloned().collect();
        if inner.is_empty() {
            return (binders.to_vec(), body.clone());
        }
        let mut names = Vec::with_capacity(binders.len());
        let mut renames = Vec::new();
        let body_fv = body.free_vars();
        for b in binders {
            if avoid.contains(b) {
                let fresh = fresh_name(b, |n| {
                    avoid.contains(n)
                        || body_fv.contains(n)
                        || binders.iter().any(|x| x == n)
                        || sub.iter().any(|(k, _)| k == n)
                });
                renames.push((b.clone(), Term::Var(fresh.clone())));
                names.push(fresh);
            } else {
                names.push(b.clone());
            }
        }
        let body = if renames.is_empty() { body.clone() } else { body.subst(&renames) };
        let inner_avoid: BTreeSet<String> = inner.iter().flat_map(|(_, v)| v.free_vars()).collect();
        (names, body.subst_in(&inner, &inner_avoid))
    }

    /// Number of AST nodes.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Ket(_) => 1,
            Term::Lam(_, t) | Term::Gate(_, t) | Term::Meas(t) | Term::Tick(t) => 1 + t.size(),
            Term::App(a, b) | Term::Tensor(a, b) => 1 + a.size() + b.size(),
            Term::Cons(_, c, q) => 1 + c.iter().chain(q).map(Term::size).sum::<usize>(),
            Term::Case(s, arms, d) => {
                1 + s.size() + arms.iter().map(|a| a.body.size()).sum::<usize>() + d.as_ref().map_or(0, |(_, t)| t.size())
            }
            Term::Letrec(l) => 1 + l.body.size(),
        }
    }
}

/// `base_1`, `base_2`, … skipping names rejected by `taken`.
pub fn fresh_name(base: &str, taken: impl Fn(&str) -> bool) -> String {
    let stem = base.split('_').next().unwrap_or(base);
    (1..).map(|i| format!("{stem}_{i}")).find(|n| !taken(n)).expect("infinite supply")
}

/// Alpha-equivalence with kets compared amplitude-wise within `tol`.
pub fn alpha_eq(a: &Term, b: &Term, tol: f64) -> bool {
    fn go(a: &Term, b: &Term, ea: &mut Vec<String>, eb: &mut Vec<String>, tol: f64) -> bool {
        fn with<R>(ea: &mut Vec<String>, eb: &mut Vec<String>, xa: &[String], xb: &[String], f: impl FnOnce(&mut Vec<String>, &mut Vec<String>) -> R) -> R {
            let (na, nb) = (ea.len(), eb.len());
            ea.extend(xa.iter().cloned());
            eb.extend(xb.iter().cloned());
            let r = f(ea, eb);
            ea.truncate(na);
            eb.truncate(nb);
            r
        }
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => {
                let ia = ea.iter().rposition(|n| n == x);
                let ib = eb.iter().rposition(|n| n == y);
                match (ia, ib) {
                    (Some(i), Some(j)) => i == j,
                    (None, None) => x == y,
                    _ => false,
                }
            }
            (Term::Lam(x, s), Term::Lam(y, t)) => {
                with(ea, eb, std::slice::from_ref(x), std::slice::from_ref(y), |ea, eb| go(s, t, ea, eb, tol))
            }
            (Term::App(a0, a1), Term::App(b0, b1)) | (Term::Tensor(a0, a1), Term::Tensor(b0, b1)) => {
                go(a0, b0, ea, eb, tol) && go(a1, b1, ea, eb, tol)
            }
            (Term::Ket(p), Term::Ket(q)) => p.approx_eq(q, tol),
            (Term::Gate(g, s), Term::Gate(h, t)) => g == h && go(s, t, ea, eb, tol),
            (Term::Meas(s), Term::Meas(t)) | (Term::Tick(s), Term::Tick(t)) => go(s, t, ea, eb, tol),
            (Term::Cons(c, ac, aq), Term::Cons(d, bc, bq)) => {
                c == d
                    && ac.len() == bc.len()
                    && aq.len() == bq.len()
                    && ac.iter().zip(bc).chain(aq.iter().zip(bq)).all(|(s, t)| go(s, t, ea, eb, tol))
            }
            (Term::Case(s, arms_a, da), Term::Case(t, arms_b, db)) => {
                go(s, t, ea, eb, tol)
                    && arms_a.len() == arms_b.len()
                    && arms_a.iter().zip(arms_b).all(|(x, y)| {
                        let xa: Vec<String> = x.classical.iter().chain(&x.quantum).cloned().collect();
                        let xb: Vec<String> = y.classical.iter().chain(&y.quantum).cloned().collect();
                        x.cons == y.cons
                            && x.classical.len() == y.classical.len()
                            && xa.len() == xb.len()
                            && with(ea, eb, &xa, &xb, |ea, eb| go(&x.body, &y.body, ea, eb, tol))
                    })
                    && match (da, db) {
                        (None, None) => true,
                        (Some((y, s)), Some((z, t))) => {
                            with(ea, eb, std::slice::from_ref(y), std::slice::from_ref(z), |ea, eb| go(s, t, ea, eb, tol))
                        }
                        _ => false,
                    }
            }
            (Term::Letrec(l), Term::Letrec(m)) => with(
                ea,
                eb,
                &[l.fun.clone(), l.param.clone()],
                &[m.fun.clone(), m.param.clone()],
                |ea, eb| go(&l.body, &m.body, ea, eb, tol),
            ),
            _ => false,
        }
    }
    go(a, b, &mut Vec::new(), &mut Vec::new(), tol)
}

// ---------------------------------------------------------------- printing

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty(self))
    }
}

pub fn pretty(t: &Term) -> String {
    let mut s = String::new();
    pp(t, Prec::Top, &mut s);
    s
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Prec {
    Top,
    App,
    Atom,
}

fn binders(cl: &[String], qu: &[String]) -> String {
    format!("({}; {})", cl.join(", "), qu.join(", "))
}

fn pp(t: &Term, prec: Prec, out: &mut String) {
    let open = matches!(t, Term::Lam(..) | Term::Letrec(_) | Term::Case(..));
    // a bare nullary constructor followed by `(` would read as an argument list
    let nullary = matches!(t, Term::Cons(_, c, q) if c.is_empty() && q.is_empty());
    let needs = ((open || nullary) && prec > Prec::Top)
        || (matches!(t, Term::App(..) | Term::Gate(..)) && prec == Prec::Atom);
    if needs {
        out.push('(');
        pp(t, Prec::Top, out);
        out.push(')');
        return;
    }
    match t {
        Term::Var(x) => out.push_str(x),
        Term::Lam(x, b) => {
            out.push_str(&format!("lam {x}. "));
            pp(b, Prec::Top, out);
        }
        Term::App(a, b) => {
            pp(a, Prec::App, out);
            out.push(' ');
            pp(b, Prec::Atom, out);
        }
        Term::Ket(k) => out.push_str(&fmt_ket(k)),
        Term::Gate(g, a) => {
            out.push_str(g);
            out.push(' ');
            pp(a, Prec::Atom, out);
        }
        Term::Meas(a) | Term::Tick(a) => {
            out.push_str(if matches!(t, Term::Meas(_)) { "meas(" } else { "tick(" });
            pp(a, Prec::Top, out);
            out.push(')');
        }
        Term::Tensor(a, b) => {
            out.push_str("tensor(");
            pp(a, Prec::Top, out);
            out.push_str(", ");
            pp(b, Prec::Top, out);
            out.push(')');
        }
        Term::Cons(c, cl, qu) => {
            out.push_str(c);
            if !cl.is_empty() || !qu.is_empty() {
                out.push('(');
                for (i, a) in cl.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    pp(a, Prec::Top, out);
                }
                out.push_str("; ");
                for (i, a) in qu.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    pp(a, Prec::Top, out);
                }
                out.push(')');
            }
        }
        Term::Case(s, arms, def) => {
            out.push_str("case ");
            pp(s, Prec::Top, out);
            out.push_str(" of");
            let n = arms.len() + usize::from(def.is_some());
            for (i, arm) in arms.iter().enumerate() {
                out.push_str(" | ");
                out.push_str(&arm.cons);
                if !arm.classical.is_empty() || !arm.quantum.is_empty() {
                    out.push_str(&binders(&arm.classical, &arm.quantum));
                }
                out.push_str(" -> ");
                pp_arm_body(&arm.body, i + 1 == n, out);
            }
            if let Some((y, b)) = def {
                out.push_str(&format!(" | {y} -> "));
                pp_arm_body(b, true, out);
            }
        }
        Term::Letrec(l) => {
            out.push_str(&format!("letrec {} {}", l.fun, l.param));
            if let Some(ty) = &l.ann {
                out.push_str(&format!(" : {ty}"));
            }
            out.push_str(" = ");
            pp(&l.body, Prec::Top, out);
        }
    }
}

fn pp_arm_body(t: &Term, last: bool, out: &mut String) {
    let open = matches!(t, Term::Lam(..) | Term::Letrec(_) | Term::Case(..));
    if open && !last {
        out.push('(');
        pp(t, Prec::Top, out);
        out.push(')');
    } else {
        pp(t, Prec::Top, out);
    }
}

// ---------------------------------------------------------------- parsing

/// A named program input, bound in the main term's context.
#[derive(Debug, Clone, PartialEq)]
pub struct Input {
    pub name: String,
    pub ty: SType,
    pub value: Option<Term>,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct Program {
    pub decls: Decls,
    pub inputs: Vec<Input>,
    pub main_ty: Option<SType>,
    pub term: Option<Term>,
    pub term_pos: Pos,
}

impl Program {
    /// Declarations, inputs and main term as reparseable text.
    pub fn pretty(&self) -> String {
        let mut out = self.decls.pretty();
        for i in &self.inputs {
            out.push_str(&format!("input {} : {}", i.name, i.ty));
            if let Some(v) = &i.value {
                out.push_str(&format!(" = {}", pretty(v)));
            }
            out.push('\n');
        }
        if let Some(ty) = &self.main_ty {
            out.push_str(&format!("main : {ty}\n"));
        }
        if let Some(t) = &self.term {
            out.push_str(&pretty(t));
            out.push('\n');
        }
        out
    }
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser { cur: Cursor::new(src)?, decls: Decls::new() };
    let mut inputs = Vec::new();
    let mut main_ty = None;
    loop {
        if p.cur.decl(&mut p.decls)? {
            continue;
        }
        let pos = p.cur.pos();
        if p.cur.eat_kw("input") {
            let name = p.var_name()?;
            p.cur.expect(&Tok::Colon)?;
            let ty = p.ty()?;
            let value = if p.cur.eat(&Tok::Eq) { Some(p.term()?) } else { None };
            p.cur.eat(&Tok::Semi);
            inputs.push(Input { name, ty, value, pos });
            continue;
        }
        if p.cur.eat_kw("main") {
            p.cur.expect(&Tok::Colon)?;
            main_ty = Some(p.ty()?);
            continue;
        }
        break;
    }
    let term_pos = p.cur.pos();
    let term = if p.cur.at_eof() { None } else { Some(p.term()?) };
    if !p.cur.at_eof() {
        return Err(p.cur.unexpected("end of input"));
    }
    Ok(Program { decls: p.decls, inputs, main_ty, term, term_pos })
}

/// Parses a lone term against existing declarations.
pub fn parse_term(decls: &Decls, src: &str) -> Result<Term, ParseError> {
    let mut p = Parser { cur: Cursor::new(src)?, decls: decls.clone() };
    let t = p.term()?;
    if !p.cur.at_eof() {
        return Err(p.cur.unexpected("end of input"));
    }
    Ok(t)
}

pub fn parse_type(src: &str) -> Result<SType, ParseError> {
    let mut p = Parser { cur: Cursor::new(src)?, decls: Decls::new() };
    let t = p.ty()?;
    if !p.cur.at_eof() {
        return Err(p.cur.unexpected("end of input"));
    }
    Ok(t)
}

struct Parser {
    cur: Cursor,
    decls: Decls,
}

impl Parser {
    fn ty(&mut self) -> Result<SType, ParseError> {
        let lhs = if self.cur.eat(&Tok::LParen) {
            let t = self.ty()?;
            self.cur.expect(&Tok::RParen)?;
            t
        } else {
            SType::Basic(self.cur.ident()?)
        };
        if self.cur.eat(&Tok::Lolli) {
            Ok(SType::lin(lhs, self.ty()?))
        } else if self.cur.eat(&Tok::FatArrow) {
            Ok(SType::exp(lhs, self.ty()?))
        } else {
            Ok(lhs)
        }
    }

    /// Lowercase variable that is not a constructor.
    fn var_name(&mut self) -> Result<String, ParseError> {
        let pos = self.cur.pos();
        let x = self.cur.ident()?;
        if x.starts_with(|c: char| c.is_uppercase()) {
            return Err(ParseError::new(pos, format!("variable `{x}` must start with a lowercase letter")));
        }
        if self.decls.is_cons(&x) {
            return Err(ParseError::new(pos, format!("`{x}` is a constructor and cannot be bound")));
        }
        Ok(x)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        if self.cur.eat_kw("lam") {
            let x = self.var_name()?;
            self.cur.expect(&Tok::Dot)?;
            return Ok(Term::lam(&x, self.term()?));
        }
        if self.cur.eat_kw("letrec") {
            let fun = self.var_name()?;
            let mut params = vec![self.var_name()?];
            while matches!(self.cur.peek(), Tok::Ident(_)) {
                params.push(self.var_name()?);
            }
            let ann = if self.cur.eat(&Tok::Colon) { Some(self.ty()?) } else { None };
            self.cur.expect(&Tok::Eq)?;
            let mut body = self.term()?;
            for x in params[1..].iter().rev() {
                body = Term::lam(x, body);
            }
            return Ok(Term::Letrec(Box::new(Letrec { fun, param: params[0].clone(), ann, body })));
        }
        if self.cur.eat_kw("case") {
            return self.case();
        }
        self.app()
    }

    fn case(&mut self) -> Result<Term, ParseError> {
        let scrut = self.term()?;
        self.cur.expect_kw("of")?;
        let mut arms = Vec::new();
        let mut default = None;
        while self.cur.eat(&Tok::Bar) {
            let pos = self.cur.pos();
            if default.is_some() {
                return Err(ParseError::new(pos, "arm after the default branch"));
            }
            let name = self.cur.cons_name()?;
            if let Some(sig) = self.decls.cons.get(&name).cloned() {
                let (classical, quantum) = self.binder_lists(sig.classical.is_empty())?;
                if classical.len() != sig.classical.len() || quantum.len() != sig.quantum.len() {
                    return Err(ParseError::new(
                        pos,
                        format!(
                            "pattern `{name}` binds {};{} variables, constructor takes {};{}",
                            classical.len(),
                            quantum.len(),
                            sig.classical.len(),
                            sig.quantum.len()
                        ),
                    ));
                }
                self.cur.expect(&Tok::Arrow)?;
                let body = self.term()?;
                arms.push(Arm { cons: name, classical, quantum, body });
            } else {
                if matches!(self.cur.peek(), Tok::LParen) || !name.starts_with(|c: char| c.is_lowercase()) {
                    return Err(ParseError::new(pos, format!("unknown constructor `{name}`")));
                }
                self.cur.expect(&Tok::Arrow)?;
                let body = self.term()?;
                default = Some((name, Box::new(body)));
            }
        }
        if arms.is_empty() && default.is_none() {
            return Err(self.cur.unexpected("`|` starting a case arm"));
        }
        Ok(Term::Case(Box::new(scrut), arms, default))
    }

    /// `(a, b; q)`; without a `;` all binders go to the side the
    /// constructor actually has.
    fn binder_lists(&mut self, quantum_only: bool) -> Result<(Vec<String>, Vec<String>), ParseError> {
        let (mut cl, mut qu) = (Vec::new(), Vec::new());
        if !self.cur.eat(&Tok::LParen) {
            return Ok((cl, qu));
        }
        let mut semi = false;
        loop {
            match self.cur.peek() {
                Tok::RParen => {
                    self.cur.bump();
                    break;
                }
                Tok::Semi if !semi => {
                    self.cur.bump();
                    semi = true;
                }
                Tok::Comma => {
                    self.cur.bump();
                }
                _ => {
                    let x = self.var_name()?;
                    if semi { qu.push(x) } else { cl.push(x) }
                }
            }
        }
        if !semi && quantum_only {
            std::mem::swap(&mut cl, &mut qu);
        }
        Ok((cl, qu))
    }

    fn starts_atom(&self) -> bool {
        match self.cur.peek() {
            Tok::Ident(s) => {
                !matches!(s.as_str(), "of" | "lam" | "letrec" | "case" | "data" | "qdata" | "unitary" | "input" | "main")
            }
            Tok::Number(_, text) => self.decls.is_cons(text),
            Tok::LParen => true,
            _ => false,
        }
    }

    fn app(&mut self) -> Result<Term, ParseError> {
        let mut f = self.prefix()?;
        while self.starts_atom() {
            let a = self.prefix()?;
            f = Term::app(f, a);
        }
        Ok(f)
    }

    /// Gate application, `meas` and `tick` bind tighter than application.
    fn prefix(&mut self) -> Result<Term, ParseError> {
        let pos = self.cur.pos();
        match self.cur.peek().clone() {
            Tok::Ident(s) if s == "meas" => {
                self.cur.bump();
                Ok(Term::Meas(Box::new(self.prefix()?)))
            }
            Tok::Ident(s) if s == "tick" => {
                self.cur.bump();
                Ok(Term::Tick(Box::new(self.prefix()?)))
            }
            Tok::Ident(s) if s.starts_with(|c: char| c.is_uppercase()) => {
                self.cur.bump();
                if !self.decls.gates.contains_key(&s) {
                    return Err(ParseError::new(pos, format!("unknown gate `{s}`")));
                }
                Ok(Term::Gate(s, Box::new(self.prefix()?)))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        let pos = self.cur.pos();
        match self.cur.peek().clone() {
            Tok::LParen => {
                self.cur.bump();
                let t = self.term()?;
                self.cur.expect(&Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(s) if s == "ket" => {
                self.cur.bump();
                Ok(Term::Ket(self.cur.ket_body()?))
            }
            Tok::Ident(s) if s == "tensor" => {
                self.cur.bump();
                self.cur.expect(&Tok::LParen)?;
                let a = self.term()?;
                self.cur.expect(&Tok::Comma)?;
                let b = self.term()?;
                self.cur.expect(&Tok::RParen)?;
                Ok(Term::Tensor(Box::new(a), Box::new(b)))
            }
            Tok::Ident(s) | Tok::Number(_, s) if self.decls.is_cons(&s) => {
                self.cur.bump();
                self.cons_args(s, pos)
            }
            Tok::Ident(s) if !crate::syntax::is_keyword(&s) && s.starts_with(|c: char| c.is_lowercase() || c == '_') => {
                self.cur.bump();
                Ok(Term::Var(s))
            }
            Tok::Number(..) => Err(ParseError::new(pos, format!("unknown constructor {}", self.cur.peek()))),
            _ => Err(self.cur.unexpected("a term")),
        }
    }

    fn cons_args(&mut self, name: String, pos: Pos) -> Result<Term, ParseError> {
        let sig = self.decls.cons[&name].clone();
        let (mut cl, mut qu) = (Vec::new(), Vec::new());
        if self.cur.eat(&Tok::LParen) {
            let mut semi = false;
            loop {
                match self.cur.peek() {
                    Tok::RParen => {
                        self.cur.bump();
                        break;
                    }
                    Tok::Semi if !semi => {
                        self.cur.bump();
                        semi = true;
                    }
                    Tok::Comma => {
                        self.cur.bump();
                    }
                    _ => {
                        let t = self.term()?;
                        if semi { qu.push(t) } else { cl.push(t) }
                    }
                }
            }
            if !semi && sig.classical.is_empty() {
                std::mem::swap(&mut cl, &mut qu);
            }
        }
        if cl.len() != sig.classical.len() || qu.len() != sig.quantum.len() {
            return Err(ParseError::new(
                pos,
                format!(
                    "constructor `{name}` takes {};{} arguments, got {};{}",
                    sig.classical.len(),
                    sig.quantum.len(),
                    cl.len(),
                    qu.len()
                ),
            ));
        }
        Ok(Term::Cons(name, cl, qu))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COINTOSS: &str = "letrec ct x = case tick(meas x) of | inj0(;x0) -> x0 | inj1(;x1) -> ct (H x1)";

    fn t(src: &str) -> Term {
        parse_term(&Decls::new(), src).unwrap()
    }

    #[test]
    fn cointoss_shape() {
        let c = t(COINTOSS);
        let Term::Letrec(l) = &c else { panic!("letrec expected") };
        assert_eq!((l.fun.as_str(), l.param.as_str()), ("ct", "x"));
        let Term::Case(s, arms, None) = &l.body else { panic!("case expected") };
        assert_eq!(**s, Term::Tick(Box::new(Term::Meas(Box::new(Term::var("x"))))));
        assert_eq!(arms.len(), 2);
        assert_eq!(arms[1].body, Term::app(Term::var("ct"), Term::Gate("H".into(), Box::new(Term::var("x1")))));
        assert!(c.free_vars().is_empty());
    }

    #[test]
    fn roundtrip_cointoss() {
        let c = t(COINTOSS);
        let printed = pretty(&c);
        assert!(alpha_eq(&t(&printed), &c, 0.0), "{printed}");
    }

    #[test]
    fn app_left_assoc_and_tensor() {
        let e = Term::app(Term::app(Term::var("f"), Term::var("a")), Term::var("b"));
        assert_eq!(pretty(&e), "f a b");
        assert_eq!(t("f a b"), e);
        assert_eq!(pretty(&t("tensor(x, y)")), "tensor(x, y)");
    }

    #[test]
    fn ket_and_scope_agnostic() {
        assert_eq!(t("ket[1|0>]"), Term::Ket(QState::basis("0").unwrap()));
        assert_eq!(t("lam x. y"), Term::lam("x", Term::var("y")));
        assert!(parse_term(&Decls::new(), "ket[2|0>]").is_err());
        assert!(parse_term(&Decls::new(), "G x").is_err());
    }

    #[test]
    fn free_vars_basics() {
        assert_eq!(t("x").free_vars().into_iter().collect::<Vec<_>>(), vec!["x".to_string()]);
        assert!(t("lam x. x").free_vars().is_empty());
    }

    #[test]
    fn substitution_avoids_capture() {
        let body = t("lam y. tensor(x, y)");
        let r = body.subst(&[("x".into(), Term::var("y"))]);
        let Term::Lam(b, _) = &r else { panic!() };
        assert_ne!(b, "y");
        assert!(r.free_vars().contains("y"));
    }

    #[test]
    fn multi_param_letrec() {
        let q = t("letrec qw x f = case tick(meas x) of | inj0(;x0) -> x0 | inj1(;x1) -> qw (f x1) f");
        let Term::Letrec(l) = q else { panic!() };
        assert!(matches!(l.body, Term::Lam(ref f, _) if f == "f"));
    }

    #[test]
    fn program_with_decls() {
        let p = parse_program("data Nat = 0 | s(Nat;)\nmain : Nat => Q\nletrec g m = case m of | 0 -> ket[|0>] | s(k;) -> H (g k)").unwrap();
        assert!(p.decls.is_cons("s"));
        assert_eq!(p.main_ty, Some(SType::exp(SType::basic("Nat"), SType::basic("Q"))));
        let again = parse_program(&p.pretty()).unwrap();
        assert!(alpha_eq(again.term.as_ref().unwrap(), p.term.as_ref().unwrap(), 1e-12));
        assert!(parse_program("data Nat = 0 | s(Nat;)\nlam s. s").is_err());
    }

    #[test]
    fn type_printing() {
        let ty = parse_type("Q -o (Q -o Q) => Q").unwrap();
        assert_eq!(ty.to_string(), "Q -o (Q -o Q) => Q");
        assert_eq!(parse_type(&ty.to_string()).unwrap(), ty);
    }
}
