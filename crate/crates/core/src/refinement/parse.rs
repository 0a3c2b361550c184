//! Text format for refinement types and bound files (`.rty`).
//!
//! ```text
//! candidate c(X : Q) : R+inf = 1 + 2 * p1(X)
//! context X : Q
//! assume p1(X) <= 1
//! type (X : Q) => {Z : R+inf | Z <= c(X)}
//! ```

use std::collections::BTreeSet;

use crate::cs::parse::CsParser;
use crate::decls::Decls;
use crate::syntax::{Cursor, ParseError, Tok};

use super::{fresh_name, Candidate, FExpr, Formula, Op, RefContext, RefType, Rel, Structure};

/// A parsed bound file.
#[derive(Debug, Clone)]
pub struct RtyFile {
    pub decls: Decls,
    pub candidates: Vec<Candidate>,
    pub context: RefContext,
    pub structure: Structure,
    pub ty: RefType,
}

struct RtyParser {
    p: CsParser,
    candidates: Vec<Candidate>,
}

impl RtyParser {
    fn new(decls: &Decls, src: &str) -> Result<Self, ParseError> {
        Ok(RtyParser { p: CsParser::new(Cursor::new(src)?, decls.clone()), candidates: Vec::new() })
    }

    fn cur(&mut self) -> &mut Cursor {
        &mut self.p.cur
    }

    fn ref_type(&mut self) -> Result<RefType, ParseError> {
        if self.cur().eat_kw("forall") {
            let x = self.cur().ident()?;
            self.cur().expect(&Tok::Colon)?;
            let bound = self.ref_type()?;
            self.cur().expect(&Tok::Dot)?;
            return Ok(RefType::forall(&x, bound, self.ref_type()?));
        }
        if matches!(self.p.cur.peek(), Tok::LParen)
            && matches!(self.p.cur.peek_at(1), Tok::Ident(_))
            && matches!(self.p.cur.peek_at(2), Tok::Colon)
        {
            self.cur().bump();
            let x = self.cur().ident()?;
            self.cur().bump();
            let dom = self.ref_type()?;
            self.cur().expect(&Tok::RParen)?;
            self.cur().expect(&Tok::FatArrow)?;
            return Ok(RefType::arrow(&x, dom, self.ref_type()?));
        }
        let lhs = self.ref_atom()?;
        if self.cur().eat(&Tok::FatArrow) {
            let cod = self.ref_type()?;
            let mut avoid = BTreeSet::new();
            cod.all_vars(&mut avoid);
            lhs.all_vars(&mut avoid);
            return Ok(RefType::arrow(&fresh_name("X", &avoid), lhs, cod));
        }
        Ok(lhs)
    }

    fn ref_atom(&mut self) -> Result<RefType, ParseError> {
        if self.cur().eat(&Tok::LBrace) {
            let z = self.cur().ident()?;
            self.cur().expect(&Tok::Colon)?;
            let base = self.p.ty_atom()?;
            self.cur().expect(&Tok::Bar)?;
            let phi = self.formula()?;
            self.cur().expect(&Tok::RBrace)?;
            return Ok(RefType::base(base, &z, phi));
        }
        if self.cur().eat(&Tok::LParen) {
            let t = self.ref_type()?;
            self.cur().expect(&Tok::RParen)?;
            return Ok(t);
        }
        Ok(RefType::plain(self.p.ty_atom()?))
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.disj()?;
        if self.cur().eat(&Tok::FatArrow) {
            return Ok(Formula::Implies(Box::new(lhs), Box::new(self.formula()?)));
        }
        Ok(lhs)
    }

    fn disj(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.conj()?;
        if self.cur().eat(&Tok::Or) {
            return Ok(Formula::Or(Box::new(lhs), Box::new(self.disj()?)));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.unary()?;
        if self.cur().eat(&Tok::And) {
            return Ok(Formula::And(Box::new(lhs), Box::new(self.conj()?)));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if self.cur().eat_kw("not") {
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        for (kw, univ) in [("forall", true), ("exists", false)] {
            if self.cur().eat_kw(kw) {
                let x = self.cur().ident()?;
                self.cur().expect(&Tok::Colon)?;
                let ty = self.p.ty()?;
                self.cur().expect(&Tok::Dot)?;
                let body = self.formula()?;
                return Ok(if univ { Formula::forall(&x, ty, body) } else { Formula::exists(&x, ty, body) });
            }
        }
        if self.cur().eat_kw("true") {
            return Ok(Formula::True);
        }
        if self.cur().eat_kw("false") {
            return Ok(Formula::False);
        }
        if self.cur().is_kw("is") && matches!(self.p.cur.peek_at(1), Tok::LParen) {
            self.cur().bump();
            self.cur().bump();
            let c = self.cur().cons_name()?;
            if !self.p.decls.is_cons(&c) {
                return Err(self.p.cur.err(format!("unknown constructor `{c}`")));
            }
            self.cur().expect(&Tok::Comma)?;
            let e = self.expr()?;
            self.cur().expect(&Tok::RParen)?;
            return Ok(Formula::IsCons(c, e));
        }
        if matches!(self.p.cur.peek(), Tok::LParen) {
            let m = self.p.cur.mark();
            self.cur().bump();
            if let Ok(f) = self.formula() {
                if self.cur().eat(&Tok::RParen) && !self.at_expr_continuation() {
                    return Ok(f);
                }
            }
            self.p.cur.reset(m);
        }
        let a = self.expr()?;
        let rel = match self.cur().bump() {
            Tok::Eq => Rel::Eq,
            Tok::Ne => Rel::Ne,
            Tok::Le => Rel::Le,
            Tok::Sqsub => Rel::Sqsub,
            _ => return Err(self.p.cur.err("expected a relation `=`, `!=`, `<=` or `<<=`")),
        };
        Ok(Formula::atom(rel, a, self.expr()?))
    }

    /// After a parenthesised group, tokens that mean it was an expression.
    fn at_expr_continuation(&self) -> bool {
        matches!(
            self.p.cur.peek(),
            Tok::Eq | Tok::Ne | Tok::Le | Tok::Sqsub | Tok::Plus | Tok::Minus | Tok::Star | Tok::Slash | Tok::CAdd
        )
    }

    fn expr(&mut self) -> Result<FExpr, ParseError> {
        let mut acc = self.term()?;
        loop {
            let op = match self.p.cur.peek() {
                Tok::Plus => Op::Add,
                Tok::Minus => Op::Sub,
                Tok::CAdd => Op::CAdd,
                _ => return Ok(acc),
            };
            self.cur().bump();
            acc = FExpr::bin(op, acc, self.term()?);
        }
    }

    fn term(&mut self) -> Result<FExpr, ParseError> {
        let mut acc = self.factor()?;
        loop {
            let op = match self.p.cur.peek() {
                Tok::Star => Op::Mul,
                Tok::Slash => Op::Div,
                _ => return Ok(acc),
            };
            self.cur().bump();
            acc = FExpr::bin(op, acc, self.factor()?);
        }
    }

    fn factor(&mut self) -> Result<FExpr, ParseError> {
        if self.cur().eat(&Tok::Minus) {
            return Ok(FExpr::bin(Op::Sub, FExpr::Num(0.0), self.factor()?));
        }
        self.atom()
    }

    fn args(&mut self) -> Result<Vec<FExpr>, ParseError> {
        self.cur().expect(&Tok::LParen)?;
        let mut out = Vec::new();
        if self.cur().eat(&Tok::RParen) {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.cur().eat(&Tok::RParen) {
                return Ok(out);
            }
            self.cur().expect(&Tok::Comma)?;
        }
    }

    fn fixed_args(&mut self, name: &str, n: usize) -> Result<Vec<FExpr>, ParseError> {
        let pos = self.p.cur.pos();
        let a = self.args()?;
        if a.len() != n {
            return Err(ParseError::new(pos, format!("`{name}` takes {n} argument(s)")));
        }
        Ok(a)
    }

    fn atom(&mut self) -> Result<FExpr, ParseError> {
        let pos = self.p.cur.pos();
        match self.p.cur.peek().clone() {
            Tok::Number(_, text)
                if matches!(self.p.cur.peek_at(1), Tok::LParen) && self.p.decls.is_cons(&text) =>
            {
                self.cur().bump();
                let a = self.args()?;
                Ok(FExpr::Cons(text, a))
            }
            Tok::Number(..) => Ok(FExpr::Num(self.p.cur.real_atom()?)),
            Tok::LParen => {
                self.cur().bump();
                let e = self.expr()?;
                self.cur().expect(&Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) => {
                self.cur().bump();
                let call = matches!(self.p.cur.peek(), Tok::LParen);
                match s.as_str() {
                    "inf" => Ok(FExpr::Num(f64::INFINITY)),
                    "ket" => Ok(FExpr::Ket(self.p.cur.ket_body()?)),
                    "sqrt" | "pi" | "exp" | "cos" | "sin" => {
                        self.p.cur.reset(self.p.cur.mark() - 1);
                        Ok(FExpr::Num(self.p.cur.real_atom()?))
                    }
                    "bary" if call => {
                        let mut a = self.fixed_args(&s, 3)?.into_iter();
                        let (x, v, y) = (a.next().unwrap(), a.next().unwrap(), a.next().unwrap());
                        Ok(FExpr::Bary(Box::new(x), Box::new(v), Box::new(y)))
                    }
                    "p0" | "p1" if call => {
                        let a = self.fixed_args(&s, 1)?.remove(0);
                        Ok(FExpr::Prob(u8::from(s == "p1"), Box::new(a)))
                    }
                    "collapse0" | "collapse1" => {
                        let a = self.fixed_args(&s, 1)?.remove(0);
                        Ok(FExpr::Collapse(u8::from(s == "collapse1"), Box::new(a)))
                    }
                    "tensor" => {
                        let mut a = self.fixed_args(&s, 2)?.into_iter();
                        let (x, y) = (a.next().unwrap(), a.next().unwrap());
                        Ok(FExpr::Tensor(Box::new(x), Box::new(y)))
                    }
                    _ if crate::syntax::is_keyword(&s) => Err(ParseError::new(pos, format!("unexpected `{s}`"))),
                    _ if self.p.decls.gates.contains_key(&s) && call => {
                        let a = self.fixed_args(&s, 1)?.remove(0);
                        Ok(FExpr::Gate(s, Box::new(a)))
                    }
                    _ if self.p.decls.is_cons(&s) => {
                        let a = if call { self.args()? } else { Vec::new() };
                        Ok(FExpr::Cons(s, a))
                    }
                    _ if call => Ok(FExpr::Call(s.clone(), self.args()?)),
                    _ => Ok(FExpr::Var(s)),
                }
            }
            _ => Err(self.p.cur.unexpected("an expression")),
        }
    }

    fn candidate(&mut self) -> Result<Candidate, ParseError> {
        let name = self.cur().ident()?;
        self.cur().expect(&Tok::LParen)?;
        let mut params = Vec::new();
        if !self.cur().eat(&Tok::RParen) {
            loop {
                let x = self.cur().ident()?;
                self.cur().expect(&Tok::Colon)?;
                params.push((x, self.p.ty()?));
                if self.cur().eat(&Tok::RParen) {
                    break;
                }
                self.cur().expect(&Tok::Comma)?;
            }
        }
        self.cur().expect(&Tok::Colon)?;
        let ret = self.p.ty_atom()?;
        self.cur().expect(&Tok::Eq)?;
        let body = self.expr()?;
        Ok(Candidate { name, params, ret, body })
    }
}

fn whole<T>(
    decls: &Decls,
    src: &str,
    f: impl FnOnce(&mut RtyParser) -> Result<T, ParseError>,
) -> Result<T, ParseError> {
    let mut r = RtyParser::new(decls, src)?;
    let out = f(&mut r)?;
    r.p.finish()?;
    Ok(out)
}

pub fn parse_fexpr(decls: &Decls, src: &str) -> Result<FExpr, ParseError> {
    whole(decls, src, |r| r.expr())
}

pub fn parse_formula(decls: &Decls, src: &str) -> Result<Formula, ParseError> {
    whole(decls, src, |r| r.formula())
}

pub fn parse_ref_type(decls: &Decls, src: &str) -> Result<RefType, ParseError> {
    whole(decls, src, |r| r.ref_type())
}

/// Parses a bound file. Declarations in `decls` (usually those of the
/// accompanying term) are visible and may be extended.
pub fn parse_rty(decls: &Decls, src: &str) -> Result<RtyFile, ParseError> {
    let mut r = RtyParser::new(decls, src)?;
    let mut context = RefContext::new();
    let mut structure = Structure::RealsPlus;
    let mut ty = None;
    loop {
        if r.p.cur.decl(&mut r.p.decls)? {
            continue;
        }
        let pos = r.p.cur.pos();
        if r.cur().eat_kw("candidate") {
            let c = r.candidate()?;
            if r.candidates.iter().any(|d| d.name == c.name) {
                return Err(ParseError::new(pos, format!("candidate `{}` defined twice", c.name)));
            }
            r.candidates.push(c);
        } else if r.cur().eat_kw("context") {
            let x = r.cur().ident()?;
            r.cur().expect(&Tok::Colon)?;
            context = context.bind(&x, r.ref_type()?);
        } else if r.cur().eat_kw("assume") {
            context = context.fact(r.formula()?);
        } else if r.cur().eat_kw("structure") {
            structure = match r.cur().bump() {
                Tok::Ident(s) if s == "unit" => Structure::UnitForgetful,
                Tok::Ident(s) if s == "R" && r.cur().eat(&Tok::Plus) && r.cur().eat_kw("inf") => Structure::RealsPlus,
                _ => return Err(ParseError::new(pos, "expected `structure R+inf` or `structure unit`")),
            };
        } else if r.cur().eat_kw("type") {
            if ty.is_some() {
                return Err(ParseError::new(pos, "more than one `type` line"));
            }
            ty = Some(r.ref_type()?);
        } else {
            break;
        }
    }
    r.p.finish()?;
    let ty = ty.ok_or_else(|| r.p.cur.err("missing `type` line"))?;
    Ok(RtyFile { decls: r.p.decls, candidates: r.candidates, context, structure, ty })
}
