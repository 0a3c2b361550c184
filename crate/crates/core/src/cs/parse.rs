//! Text format for cost-structure terms (`.csl`).
//!
//! Same declarations and literals as source programs, plus `real r`,
//! `T0 +^ T1`, `T0 (+p0 V) T1`, `collapse0(V)`, `collapse1(V)` and the
//! gate sigil `#U V`. Variables may start with either case.

use crate::decls::Decls;
use crate::syntax::{is_keyword, Cursor, ParseError, Pos, Tok};

use super::{cs_pretty, CsArm, CsLetrec, CsTerm, CsType};

#[derive(Debug, Clone, PartialEq)]
pub struct CsInput {
    pub name: String,
    pub ty: CsType,
    pub value: Option<CsTerm>,
    pub pos: Pos,
}

#[derive(Debug, Clone)]
pub struct CsProgram {
    pub decls: Decls,
    pub inputs: Vec<CsInput>,
    pub main_ty: Option<CsType>,
    pub term: Option<CsTerm>,
    pub term_pos: Pos,
}

impl CsProgram {
    pub fn pretty(&self) -> String {
        let mut out = self.decls.pretty();
        for i in &self.inputs {
            out.push_str(&format!("input {} : {}", i.name, i.ty));
            if let Some(v) = &i.value {
                out.push_str(&format!(" = {}", cs_pretty(v)));
            }
            out.push('\n');
        }
        if let Some(ty) = &self.main_ty {
            out.push_str(&format!("main : {ty}\n"));
        }
        if let Some(t) = &self.term {
            out.push_str(&cs_pretty(t));
            out.push('\n');
        }
        out
    }
}

pub fn parse_cs_program(src: &str) -> Result<CsProgram, ParseError> {
    let mut p = CsParser { cur: Cursor::new(src)?, decls: Decls::new() };
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
            inputs.push(CsInput { name, ty, value, pos });
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
    p.finish()?;
    Ok(CsProgram { decls: p.decls, inputs, main_ty, term, term_pos })
}

pub fn parse_cs_term(decls: &Decls, src: &str) -> Result<CsTerm, ParseError> {
    let mut p = CsParser { cur: Cursor::new(src)?, decls: decls.clone() };
    let t = p.term()?;
    p.finish()?;
    Ok(t)
}

pub fn parse_cs_type(src: &str) -> Result<CsType, ParseError> {
    let mut p = CsParser { cur: Cursor::new(src)?, decls: Decls::new() };
    let t = p.ty()?;
    p.finish()?;
    Ok(t)
}

/// Parser state shared with the refinement-type format.
pub(crate) struct CsParser {
    pub cur: Cursor,
    pub decls: Decls,
}

impl CsParser {
    pub fn new(cur: Cursor, decls: Decls) -> Self {
        CsParser { cur, decls }
    }

    pub fn finish(&self) -> Result<(), ParseError> {
        if self.cur.at_eof() {
            Ok(())
        } else {
            Err(self.cur.unexpected("end of input"))
        }
    }

    pub fn ty(&mut self) -> Result<CsType, ParseError> {
        let lhs = self.ty_atom()?;
        if self.cur.eat(&Tok::FatArrow) {
            Ok(CsType::arrow(lhs, self.ty()?))
        } else {
            Ok(lhs)
        }
    }

    pub fn ty_atom(&mut self) -> Result<CsType, ParseError> {
        if self.cur.eat(&Tok::LParen) {
            let t = self.ty()?;
            self.cur.expect(&Tok::RParen)?;
            return Ok(t);
        }
        let name = self.cur.ident()?;
        Ok(match name.as_str() {
            "K" => CsType::K,
            "R" if self.cur.eat(&Tok::Plus) => {
                self.cur.expect_kw("inf")?;
                CsType::RInf
            }
            _ => CsType::Basic(name),
        })
    }

    pub fn var_name(&mut self) -> Result<String, ParseError> {
        let pos = self.cur.pos();
        let x = self.cur.ident()?;
        if self.decls.is_cons(&x) {
            return Err(ParseError::new(pos, format!("`{x}` is a constructor and cannot be bound")));
        }
        Ok(x)
    }

    pub fn term(&mut self) -> Result<CsTerm, ParseError> {
        if self.cur.eat_kw("lam") {
            let x = self.var_name()?;
            self.cur.expect(&Tok::Dot)?;
            return Ok(CsTerm::lam(&x, self.term()?));
        }
        if self.cur.eat_kw("letrec") {
            let fun = self.var_name()?;
            let mut params = vec![self.var_name()?];
            while matches!(self.cur.peek(), Tok::Ident(s) if !is_keyword(s)) {
                params.push(self.var_name()?);
            }
            let ann = if self.cur.eat(&Tok::Colon) { Some(self.ty()?) } else { None };
            self.cur.expect(&Tok::Eq)?;
            let mut body = self.term()?;
            for x in params[1..].iter().rev() {
                body = CsTerm::lam(x, body);
            }
            return Ok(CsTerm::Letrec(Box::new(CsLetrec { fun, param: params[0].clone(), ann, body })));
        }
        if self.cur.eat_kw("case") {
            return self.case();
        }
        let lhs = self.app()?;
        if self.cur.eat(&Tok::CAdd) {
            return Ok(CsTerm::cadd(lhs, self.term()?));
        }
        if self.at_bary() {
            self.cur.bump();
            self.cur.bump();
            self.cur.expect_kw("p0")?;
            let v = self.term()?;
            self.cur.expect(&Tok::RParen)?;
            return Ok(CsTerm::bary(lhs, v, self.term()?));
        }
        Ok(lhs)
    }

    fn at_bary(&self) -> bool {
        matches!(self.cur.peek(), Tok::LParen) && matches!(self.cur.peek_at(1), Tok::Plus)
    }

    fn case(&mut self) -> Result<CsTerm, ParseError> {
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
                let mut params = Vec::new();
                if self.cur.eat(&Tok::LParen) {
                    while !self.cur.eat(&Tok::RParen) {
                        if !params.is_empty() {
                            // the source-style `;` separator is accepted too
                            if !self.cur.eat(&Tok::Comma) {
                                self.cur.expect(&Tok::Semi)?;
                            }
                        } else {
                            self.cur.eat(&Tok::Semi);
                        }
                        params.push(self.var_name()?);
                    }
                }
                if params.len() != sig.arity() {
                    return Err(ParseError::new(
                        pos,
                        format!("pattern `{name}` binds {} variables, constructor takes {}", params.len(), sig.arity()),
                    ));
                }
                self.cur.expect(&Tok::Arrow)?;
                arms.push(CsArm { cons: name, params, body: self.term()? });
            } else {
                if matches!(self.cur.peek(), Tok::LParen) || name.starts_with(|c: char| c.is_ascii_digit()) {
                    return Err(ParseError::new(pos, format!("unknown constructor `{name}`")));
                }
                self.cur.expect(&Tok::Arrow)?;
                default = Some((name, Box::new(self.term()?)));
            }
        }
        if arms.is_empty() && default.is_none() {
            return Err(self.cur.unexpected("`|` starting a case arm"));
        }
        Ok(CsTerm::Case(Box::new(scrut), arms, default))
    }

    fn starts_atom(&self) -> bool {
        match self.cur.peek() {
            Tok::Ident(s) => !is_keyword(s) || matches!(s.as_str(), "ket" | "tensor" | "collapse0" | "collapse1" | "real"),
            Tok::Number(_, text) => self.decls.is_cons(text),
            Tok::LParen => !self.at_bary(),
            Tok::Hash => true,
            _ => false,
        }
    }

    fn app(&mut self) -> Result<CsTerm, ParseError> {
        let mut f = self.prefix()?;
        while self.starts_atom() {
            f = CsTerm::app(f, self.prefix()?);
        }
        Ok(f)
    }

    fn prefix(&mut self) -> Result<CsTerm, ParseError> {
        let pos = self.cur.pos();
        if self.cur.eat(&Tok::Hash) {
            let g = match self.cur.bump() {
                Tok::Ident(g) => g,
                _ => return Err(ParseError::new(pos, "expected a gate name after `#`")),
            };
            if !self.decls.gates.contains_key(&g) {
                return Err(ParseError::new(pos, format!("unknown gate `{g}`")));
            }
            return Ok(CsTerm::Gate(g, Box::new(self.prefix()?)));
        }
        if self.cur.eat_kw("real") {
            let r = self.cur.real_expr()?;
            if !(r >= 0.0) || !r.is_finite() {
                return Err(ParseError::new(pos, format!("real constants are finite and nonnegative, got {r}")));
            }
            return Ok(CsTerm::Real(r));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<CsTerm, ParseError> {
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
                Ok(CsTerm::Ket(self.cur.ket_body()?))
            }
            Tok::Ident(s) if s == "tensor" => {
                self.cur.bump();
                self.cur.expect(&Tok::LParen)?;
                let a = self.term()?;
                self.cur.expect(&Tok::Comma)?;
                let b = self.term()?;
                self.cur.expect(&Tok::RParen)?;
                Ok(CsTerm::Tensor(Box::new(a), Box::new(b)))
            }
            Tok::Ident(s) if s == "collapse0" || s == "collapse1" => {
                self.cur.bump();
                self.cur.expect(&Tok::LParen)?;
                let v = self.term()?;
                self.cur.expect(&Tok::RParen)?;
                Ok(CsTerm::Collapse(u8::from(s == "collapse1"), Box::new(v)))
            }
            Tok::Ident(s) | Tok::Number(_, s) if self.decls.is_cons(&s) => {
                self.cur.bump();
                let arity = self.decls.cons[&s].arity();
                let mut args = Vec::new();
                if self.cur.eat(&Tok::LParen) {
                    while !self.cur.eat(&Tok::RParen) {
                        if !args.is_empty() && !self.cur.eat(&Tok::Comma) {
                            self.cur.expect(&Tok::Semi)?;
                        } else if args.is_empty() {
                            self.cur.eat(&Tok::Semi);
                        }
                        args.push(self.term()?);
                    }
                }
                if args.len() != arity {
                    return Err(ParseError::new(
                        pos,
                        format!("constructor `{s}` takes {arity} arguments, got {}", args.len()),
                    ));
                }
                Ok(CsTerm::Cons(s, args))
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.cur.bump();
                Ok(CsTerm::Var(s))
            }
            Tok::Number(..) => Err(ParseError::new(pos, format!("unknown constructor {}", self.cur.peek()))),
            _ => Err(self.cur.unexpected("a term")),
        }
    }
}
