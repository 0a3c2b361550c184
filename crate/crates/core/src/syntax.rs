//! Lexer and parsing helpers shared by the `.aql`, `.csl` and `.rty` formats:
//! complex coefficient expressions, ket and matrix literals, and the
//! `data` / `qdata` / `unitary` declaration preamble.

use std::fmt;

use num_complex::Complex;
use thiserror::Error;

use crate::decls::{ConsSig, Decls, DeclError};
use crate::linalg::{QState, Unitary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, serde::Serialize)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{pos}: {msg}")]
pub struct ParseError {
    pub pos: Pos,
    pub msg: String,
}

impl ParseError {
    pub fn new(pos: Pos, msg: impl Into<String>) -> Self {
        ParseError { pos, msg: msg.into() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Numeric literal with its source text (numerals double as constructor names).
    Number(f64, String),
    Imag(f64),
    /// `|0101>`
    Basis(String),
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Dot,
    Bar,
    Colon,
    Eq,
    Arrow,
    FatArrow,
    Lolli,
    Plus,
    Minus,
    Star,
    Slash,
    Hash,
    CAdd,
    Le,
    Sqsub,
    Ne,
    And,
    Or,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Number(_, s) => return write!(f, "`{s}`"),
            Tok::Imag(x) => return write!(f, "`{x}i`"),
            Tok::Basis(b) => return write!(f, "`|{b}>`"),
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrack => "[",
            Tok::RBrack => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Semi => ";",
            Tok::Dot => ".",
            Tok::Bar => "|",
            Tok::Colon => ":",
            Tok::Eq => "=",
            Tok::Arrow => "->",
            Tok::FatArrow => "=>",
            Tok::Lolli => "-o",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Star => "*",
            Tok::Slash => "/",
            Tok::Hash => "#",
            Tok::CAdd => "+^",
            Tok::Le => "<=",
            Tok::Sqsub => "<<=",
            Tok::Ne => "!=",
            Tok::And => "/\\",
            Tok::Or => "\\/",
            Tok::Eof => return write!(f, "end of input"),
        };
        write!(f, "`{s}`")
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

pub fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    macro_rules! adv {
        ($n:expr) => {{
            for _ in 0..$n {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
        }};
    }
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let next = chars.get(i + 1).copied();
        if c.is_whitespace() {
            adv!(1);
            continue;
        }
        if c == '-' && next == Some('-') {
            while i < chars.len() && chars[i] != '\n' {
                adv!(1);
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '-' || chars[k] == '+') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let text: String = chars[start..j].iter().collect();
            let value: f64 = text
                .parse()
                .map_err(|_| ParseError::new(pos, format!("bad number `{text}`")))?;
            let imag = j < chars.len() && chars[j] == 'i' && !chars.get(j + 1).is_some_and(|&c| is_ident_char(c));
            if imag {
                adv!(j - start + 1);
                out.push((Tok::Imag(value), pos));
            } else {
                adv!(j - start);
                out.push((Tok::Number(value, text), pos));
            }
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            let mut j = i;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            let text: String = chars[start..j].iter().collect();
            adv!(j - start);
            out.push((Tok::Ident(text), pos));
            continue;
        }
        if c == '|' {
            let mut j = i + 1;
            while j < chars.len() && (chars[j] == '0' || chars[j] == '1') {
                j += 1;
            }
            if j > i + 1 && j < chars.len() && chars[j] == '>' {
                let bits: String = chars[i + 1..j].iter().collect();
                adv!(j - i + 1);
                out.push((Tok::Basis(bits), pos));
                continue;
            }
        }
        let third = chars.get(i + 2).copied();
        let (tok, len) = match (c, next) {
            ('-', Some('>')) => (Tok::Arrow, 2),
            ('-', Some('o')) if !third.is_some_and(is_ident_char) => (Tok::Lolli, 2),
            ('=', Some('>')) => (Tok::FatArrow, 2),
            ('+', Some('^')) => (Tok::CAdd, 2),
            ('<', Some('<')) if third == Some('=') => (Tok::Sqsub, 3),
            ('<', Some('=')) => (Tok::Le, 2),
            ('!', Some('=')) => (Tok::Ne, 2),
            ('/', Some('\\')) => (Tok::And, 2),
            ('\\', Some('/')) => (Tok::Or, 2),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('[', _) => (Tok::LBrack, 1),
            (']', _) => (Tok::RBrack, 1),
            ('{', _) => (Tok::LBrace, 1),
            ('}', _) => (Tok::RBrace, 1),
            (',', _) => (Tok::Comma, 1),
            (';', _) => (Tok::Semi, 1),
            ('.', _) => (Tok::Dot, 1),
            ('|', _) => (Tok::Bar, 1),
            (':', _) => (Tok::Colon, 1),
            ('=', _) => (Tok::Eq, 1),
            ('+', _) => (Tok::Plus, 1),
            ('-', _) => (Tok::Minus, 1),
            ('*', _) => (Tok::Star, 1),
            ('/', _) => (Tok::Slash, 1),
            ('#', _) => (Tok::Hash, 1),
            _ => return Err(ParseError::new(pos, format!("unexpected character `{c}`"))),
        };
        adv!(len);
        out.push((tok, pos));
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

/// Words that can never be variable names.
pub const KEYWORDS: &[&str] = &[
    "data", "qdata", "unitary", "input", "main", "candidate", "context", "type", "lam", "letrec", "case", "of",
    "tick", "meas", "tensor", "ket", "real", "collapse0", "collapse1", "forall", "exists", "not", "true", "false",
    "inf",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

/// Token cursor with the helpers every format parser needs.
pub struct Cursor {
    toks: Vec<(Tok, Pos)>,
    idx: usize,
}

impl Cursor {
    pub fn new(src: &str) -> Result<Self, ParseError> {
        Ok(Cursor { toks: lex(src)?, idx: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.idx].0
    }

    pub fn peek_at(&self, k: usize) -> &Tok {
        let j = (self.idx + k).min(self.toks.len() - 1);
        &self.toks[j].0
    }

    pub fn pos(&self) -> Pos {
        self.toks[self.idx].1
    }

    pub fn bump(&mut self) -> Tok {
        let t = self.toks[self.idx].0.clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    /// Current token index, for backtracking with [`Cursor::reset`].
    pub fn mark(&self) -> usize {
        self.idx
    }

    pub fn reset(&mut self, mark: usize) {
        self.idx = mark;
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.pos(), msg)
    }

    pub fn unexpected(&self, wanted: &str) -> ParseError {
        self.err(format!("expected {wanted}, found {}", self.peek()))
    }

    pub fn expect(&mut self, t: &Tok) -> Result<(), ParseError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.unexpected(&t.to_string()))
        }
    }

    pub fn expect_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    /// A non-keyword identifier.
    pub fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("an identifier")),
        }
    }

    /// Identifier or numeral, as used for constructor names.
    pub fn cons_name(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                Ok(s)
            }
            Tok::Number(_, text) if text.chars().all(|c| c.is_ascii_digit()) => {
                self.bump();
                Ok(text)
            }
            _ => Err(self.unexpected("a constructor name")),
        }
    }

    /// Complex expression: sums of products.
    pub fn cexpr(&mut self) -> Result<Complex<f64>, ParseError> {
        let mut acc = self.cterm()?;
        loop {
            if self.eat(&Tok::Plus) {
                acc += self.cterm()?;
            } else if self.eat(&Tok::Minus) {
                acc -= self.cterm()?;
            } else {
                return Ok(acc);
            }
        }
    }

    /// Products and quotients, with no top-level sum (ket coefficients).
    pub fn cterm(&mut self) -> Result<Complex<f64>, ParseError> {
        let mut acc = self.cunary()?;
        loop {
            if self.eat(&Tok::Star) {
                acc *= self.cunary()?;
            } else if matches!(self.peek(), Tok::Slash) {
                let pos = self.pos();
                self.bump();
                let d = self.cunary()?;
                if d.norm() == 0.0 {
                    return Err(ParseError::new(pos, "division by zero"));
                }
                acc /= d;
            } else {
                return Ok(acc);
            }
        }
    }

    fn cunary(&mut self) -> Result<Complex<f64>, ParseError> {
        if self.eat(&Tok::Minus) {
            return Ok(-self.cunary()?);
        }
        self.catom()
    }

    fn catom(&mut self) -> Result<Complex<f64>, ParseError> {
        match self.peek().clone() {
            Tok::Number(x, _) => {
                self.bump();
                Ok(Complex::new(x, 0.0))
            }
            Tok::Imag(x) => {
                self.bump();
                Ok(Complex::new(0.0, x))
            }
            Tok::LParen => {
                self.bump();
                let v = self.cexpr()?;
                self.expect(&Tok::RParen)?;
                Ok(v)
            }
            Tok::Ident(s) if s == "i" => {
                self.bump();
                Ok(Complex::new(0.0, 1.0))
            }
            Tok::Ident(s) if s == "pi" => {
                self.bump();
                Ok(Complex::new(std::f64::consts::PI, 0.0))
            }
            Tok::Ident(s) if matches!(s.as_str(), "sqrt" | "exp" | "cos" | "sin") => {
                self.bump();
                self.expect(&Tok::LParen)?;
                let v = self.cexpr()?;
                self.expect(&Tok::RParen)?;
                Ok(match s.as_str() {
                    "sqrt" => v.sqrt(),
                    "exp" => v.exp(),
                    "cos" => v.cos(),
                    _ => v.sin(),
                })
            }
            _ => Err(self.unexpected("a number")),
        }
    }

    /// Real-valued expression (imaginary part must vanish).
    pub fn real_expr(&mut self) -> Result<f64, ParseError> {
        let pos = self.pos();
        let v = self.cexpr()?;
        if v.im.abs() > 1e-12 {
            return Err(ParseError::new(pos, "expected a real number"));
        }
        Ok(v.re)
    }

    /// A single real atom: a literal, a parenthesised constant or a function of one.
    pub fn real_atom(&mut self) -> Result<f64, ParseError> {
        let pos = self.pos();
        let v = self.catom()?;
        if v.im.abs() > 1e-12 {
            return Err(ParseError::new(pos, "expected a real number"));
        }
        Ok(v.re)
    }

    /// `ket[ c|bits> + ... ]`, after the `ket` keyword.
    pub fn ket_body(&mut self) -> Result<QState<f64>, ParseError> {
        let start = self.pos();
        self.expect(&Tok::LBrack)?;
        let mut terms: Vec<(Complex<f64>, String, Pos)> = Vec::new();
        let mut sign = 1.0;
        if self.eat(&Tok::Minus) {
            sign = -1.0;
        }
        loop {
            let pos = self.pos();
            let coef = if matches!(self.peek(), Tok::Basis(_)) { Complex::new(1.0, 0.0) } else { self.cterm()? };
            let bits = match self.bump() {
                Tok::Basis(b) => b,
                _ => return Err(ParseError::new(pos, "expected a basis ket like `|01>`")),
            };
            terms.push((coef * sign, bits, pos));
            if self.eat(&Tok::Plus) {
                sign = 1.0;
            } else if self.eat(&Tok::Minus) {
                sign = -1.0;
            } else {
                break;
            }
        }
        self.expect(&Tok::RBrack)?;
        let width = terms[0].1.len();
        let mut amps = vec![Complex::new(0.0, 0.0); 1 << width];
        for (c, bits, pos) in terms {
            if bits.len() != width {
                return Err(ParseError::new(pos, "basis kets of different lengths"));
            }
            amps[usize::from_str_radix(&bits, 2).expect("lexer only admits bits")] += c;
        }
        if width == 0 || width > 20 {
            return Err(ParseError::new(start, "ket width out of range"));
        }
        QState::renormalized(amps, 1e-6)
            .map_err(|e| ParseError::new(start, format!("malformed ket literal: {e}")))
    }

    /// `[[a, b], [c, d]]`.
    pub fn matrix(&mut self) -> Result<Vec<Vec<Complex<f64>>>, ParseError> {
        self.expect(&Tok::LBrack)?;
        let mut rows = Vec::new();
        loop {
            self.expect(&Tok::LBrack)?;
            let mut row = vec![self.cexpr()?];
            while self.eat(&Tok::Comma) {
                row.push(self.cexpr()?);
            }
            self.expect(&Tok::RBrack)?;
            rows.push(row);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(&Tok::RBrack)?;
        Ok(rows)
    }

    /// Parses `data`, `qdata` and `unitary` declarations while they appear.
    /// Returns `true` if one was consumed.
    pub fn decl(&mut self, decls: &mut Decls) -> Result<bool, ParseError> {
        let pos = self.pos();
        let quantum = if self.is_kw("data") {
            false
        } else if self.is_kw("qdata") {
            true
        } else if self.eat_kw("unitary") {
            let name = match self.bump() {
                Tok::Ident(s) if s.starts_with(|c: char| c.is_uppercase()) => s,
                _ => return Err(ParseError::new(pos, "unitary names start with an uppercase letter")),
            };
            self.expect(&Tok::Eq)?;
            let mpos = self.pos();
            let rows = self.matrix()?;
            let u = Unitary::new(rows).map_err(|e| ParseError::new(mpos, format!("gate {name}: {e}")))?;
            decls.add_gate(&name, u, pos).map_err(|e| decl_parse_error(e, pos))?;
            return Ok(true);
        } else {
            return Ok(false);
        };
        self.bump();
        let name = self.ident()?;
        decls.add_type(&name, quantum, pos).map_err(|e| decl_parse_error(e, pos))?;
        self.expect(&Tok::Eq)?;
        loop {
            let cpos = self.pos();
            let cname = self.cons_name()?;
            let (mut classical, mut quant) = (Vec::new(), Vec::new());
            if self.eat(&Tok::LParen) {
                let mut in_quantum = false;
                loop {
                    match self.peek() {
                        Tok::RParen => {
                            self.bump();
                            break;
                        }
                        Tok::Semi if !in_quantum => {
                            self.bump();
                            in_quantum = true;
                        }
                        Tok::Comma => {
                            self.bump();
                        }
                        _ => {
                            let t = self.ident()?;
                            if in_quantum {
                                quant.push(t)
                            } else {
                                classical.push(t)
                            }
                        }
                    }
                }
            }
            let sig = ConsSig { name: cname, classical, quantum: quant, result: name.clone(), pos: cpos };
            decls.add_cons(sig).map_err(|e| decl_parse_error(e, cpos))?;
            if !self.eat(&Tok::Bar) {
                break;
            }
        }
        Ok(true)
    }
}

fn decl_parse_error(e: DeclError, pos: Pos) -> ParseError {
    ParseError::new(pos, e.to_string())
}

/// Formats a float so that it lexes back to the same value.
pub fn fmt_real(x: f64) -> String {
    format!("{x:?}")
}

pub fn fmt_complex(c: Complex<f64>) -> String {
    if c.im == 0.0 {
        fmt_real(c.re)
    } else if c.re == 0.0 {
        format!("({}*i)", fmt_real(c.im))
    } else {
        format!("({} + {}*i)", fmt_real(c.re), fmt_real(c.im))
    }
}

/// Ket literal with exact round-trip amplitudes.
pub fn fmt_ket(st: &QState<f64>) -> String {
    let n = st.n_qubits();
    let parts: Vec<String> = st
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm() != 0.0)
        .map(|(i, a)| format!("{}|{:0n$b}>", fmt_complex(*a), i))
        .collect();
    if parts.is_empty() {
        // unreachable for unit-norm states
        format!("ket[0|{}>]", "0".repeat(n))
    } else {
        format!("ket[{}]", parts.join(" + "))
    }
}

pub fn fmt_matrix(u: &Unitary<f64>) -> String {
    let rows: Vec<String> = u
        .rows()
        .iter()
        .map(|r| format!("[{}]", r.iter().map(|c| fmt_complex(*c)).collect::<Vec<_>>().join(", ")))
        .collect();
    format!("[{}]", rows.join(", "))
}
