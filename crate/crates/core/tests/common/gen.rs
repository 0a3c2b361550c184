//! Type-directed random generators for well-typed programs.

use qetlab_core::cs::{CsLetrec, CsTerm};
use qetlab_core::linalg::QState;
use qetlab_core::refinement::{FExpr, Formula, Op, Rel};
use qetlab_core::source::{Arm, Letrec, SType, Term};
use rand::Rng;

fn ket<R: Rng>(rng: &mut R, max_qubits: usize) -> QState<f64> {
    let n = rng.gen_range(1..=max_qubits);
    QState::random(n, rng)
}

pub struct SourceGen {
    next: usize,
    /// Upper bound on recursive loops per program.
    pub loops_left: usize,
}

impl SourceGen {
    pub fn new(loops: usize) -> Self {
        SourceGen { next: 0, loops_left: loops }
    }

    fn fresh(&mut self, stem: &str) -> String {
        self.next += 1;
        format!("{stem}{}", self.next)
    }

    /// A term of type `Q` using `var` exactly once when given.
    pub fn q<R: Rng>(&mut self, rng: &mut R, depth: usize, var: Option<&str>) -> Term {
        let leaf = |rng: &mut R| match var {
            Some(x) => Term::var(x),
            None => Term::Ket(ket(rng, 2)),
        };
        if depth == 0 {
            return leaf(rng);
        }
        match rng.gen_range(0..9) {
            0 => leaf(rng),
            1 | 2 => {
                let g = ["H", "X", "Z", "S", "CNOT"][rng.gen_range(0..5)];
                Term::Gate(g.into(), Box::new(self.q(rng, depth - 1, var)))
            }
            3 => Term::Tick(Box::new(self.q(rng, depth - 1, var))),
            4 | 5 => {
                let scrut = Term::Meas(Box::new(self.q(rng, depth - 1, var)));
                let scrut = if rng.gen_bool(0.5) { Term::Tick(Box::new(scrut)) } else { scrut };
                let (a, b) = (self.fresh("a"), self.fresh("b"));
                let arms = vec![
                    Arm { cons: "inj0".into(), classical: vec![], quantum: vec![a.clone()], body: self.q(rng, depth - 1, Some(&a)) },
                    Arm { cons: "inj1".into(), classical: vec![], quantum: vec![b.clone()], body: self.q(rng, depth - 1, Some(&b)) },
                ];
                Term::Case(Box::new(scrut), arms, None)
            }
            6 => {
                let z = self.fresh("z");
                let body = self.q(rng, depth - 1, Some(&z));
                Term::app(Term::lam(&z, body), self.q(rng, depth - 1, var))
            }
            7 => Term::Tensor(Box::new(self.q(rng, depth - 1, var)), Box::new(Term::Ket(ket(rng, 1)))),
            _ if self.loops_left > 0 => {
                self.loops_left -= 1;
                let arg = self.q(rng, depth - 1, var);
                self.loop_term(rng, arg)
            }
            _ => leaf(rng),
        }
    }

    /// `(letrec f x = case tick(meas x) of | inj0(;a) -> a | inj1(;b) -> f (G b)) arg`
    /// with `G` a gate that leaves outcome 0 possible.
    fn loop_term<R: Rng>(&mut self, rng: &mut R, arg: Term) -> Term {
        let (f, x, a, b) = (self.fresh("f"), self.fresh("x"), self.fresh("a"), self.fresh("b"));
        let g = ["H", "X"][rng.gen_range(0..2)];
        let body = Term::Case(
            Box::new(Term::Tick(Box::new(Term::Meas(Box::new(Term::var(&x)))))),
            vec![
                Arm { cons: "inj0".into(), classical: vec![], quantum: vec![a.clone()], body: Term::var(&a) },
                Arm {
                    cons: "inj1".into(),
                    classical: vec![],
                    quantum: vec![b.clone()],
                    body: Term::app(Term::var(&f), Term::Gate(g.into(), Box::new(Term::var(&b)))),
                },
            ],
            None,
        );
        let ann = SType::lin(SType::basic("Q"), SType::basic("Q"));
        Term::app(Term::Letrec(Box::new(Letrec { fun: f, param: x, ann: Some(ann), body })), arg)
    }
}

pub struct CsGen {
    next: usize,
    /// Largest real constant; 1 keeps terms inside the unit interval.
    pub max_real: f64,
    /// Whether `letrec` may be generated.
    pub rec: bool,
}

impl CsGen {
    pub fn new(max_real: f64) -> Self {
        CsGen { next: 0, max_real, rec: true }
    }

    fn fresh(&mut self, stem: &str) -> String {
        self.next += 1;
        format!("{stem}{}", self.next)
    }

    fn real<R: Rng>(&self, rng: &mut R) -> CsTerm {
        let r = match rng.gen_range(0..4) {
            0 => 0.0,
            1 => self.max_real,
            _ => (rng.gen::<f64>() * self.max_real * 1e4).round() / 1e4,
        };
        CsTerm::Real(r)
    }

    /// A quantum value over the variables in scope.
    pub fn qv<R: Rng>(&mut self, rng: &mut R, depth: usize, qvars: &[String]) -> CsTerm {
        if depth == 0 || rng.gen_bool(0.4) {
            return if !qvars.is_empty() && rng.gen_bool(0.8) {
                CsTerm::var(&qvars[rng.gen_range(0..qvars.len())])
            } else {
                CsTerm::Ket(ket(rng, 3))
            };
        }
        let inner = Box::new(self.qv(rng, depth - 1, qvars));
        match rng.gen_range(0..3) {
            0 => CsTerm::Collapse(rng.gen_range(0..=1), inner),
            _ => CsTerm::Gate(["H", "X", "T", "SWAP"][rng.gen_range(0..4)].into(), inner),
        }
    }

    /// A term of type `K` over quantum variables `qvars`.
    pub fn k<R: Rng>(&mut self, rng: &mut R, depth: usize, qvars: &[String]) -> CsTerm {
        if depth == 0 {
            return self.real(rng);
        }
        match rng.gen_range(0..7) {
            0 => self.real(rng),
            1 => CsTerm::cadd(self.real(rng), self.k(rng, depth - 1, qvars)),
            2 | 3 => {
                let v = self.qv(rng, 2, qvars);
                CsTerm::bary(self.k(rng, depth - 1, qvars), v, self.k(rng, depth - 1, qvars))
            }
            4 => {
                let y = self.fresh("Y");
                let mut inner = qvars.to_vec();
                inner.push(y.clone());
                let body = self.k(rng, depth - 1, &inner);
                CsTerm::app(CsTerm::lam(&y, body), self.qv(rng, 2, qvars))
            }
            _ if self.rec => {
                let v = self.qv(rng, 2, qvars);
                CsTerm::app(self.rec(rng, depth - 1), v)
            }
            _ => CsTerm::cadd(self.real(rng), self.k(rng, depth - 1, qvars)),
        }
    }

    /// `letrec F Y = c +^ (T (+p0 Y) F (#G collapse1(Y)))`, with `T` random.
    pub fn rec<R: Rng>(&mut self, rng: &mut R, depth: usize) -> CsTerm {
        let (f, y) = (self.fresh("F"), self.fresh("Y"));
        let stop = self.k(rng, depth.min(2), std::slice::from_ref(&y));
        let g = ["H", "X"][rng.gen_range(0..2)];
        let again = CsTerm::app(
            CsTerm::var(&f),
            CsTerm::Gate(g.into(), Box::new(CsTerm::Collapse(1, Box::new(CsTerm::var(&y))))),
        );
        let body = CsTerm::cadd(self.real(rng), CsTerm::bary(stop, CsTerm::var(&y), again));
        CsTerm::Letrec(Box::new(CsLetrec { fun: f, param: y, ann: None, body }))
    }
}

/// Formulae over `X : Q`, `R : R+inf` and bound variables.
pub struct FormulaGen {
    next: usize,
    /// Allow quantifiers.
    pub quantifiers: bool,
}

impl FormulaGen {
    pub fn new(quantifiers: bool) -> Self {
        FormulaGen { next: 0, quantifiers }
    }

    pub fn q<R: Rng>(&mut self, rng: &mut R, depth: usize, qvars: &[&str]) -> FExpr {
        if depth == 0 || rng.gen_bool(0.4) {
            return if rng.gen_bool(0.8) {
                FExpr::var(qvars[rng.gen_range(0..qvars.len())])
            } else {
                FExpr::Ket(ket(rng, 2))
            };
        }
        let inner = Box::new(self.q(rng, depth - 1, qvars));
        match rng.gen_range(0..3) {
            0 => FExpr::Collapse(rng.gen_range(0..=1), inner),
            _ => FExpr::Gate(["H", "X", "T"][rng.gen_range(0..3)].into(), inner),
        }
    }

    pub fn real<R: Rng>(&mut self, rng: &mut R, depth: usize, rvars: &[&str], qvars: &[&str]) -> FExpr {
        if depth == 0 {
            return match rng.gen_range(0..3) {
                0 => FExpr::Num((rng.gen::<f64>() * 4.0 * 100.0).round() / 100.0),
                1 => FExpr::Prob(rng.gen_range(0..=1), Box::new(self.q(rng, 2, qvars))),
                _ => FExpr::var(rvars[rng.gen_range(0..rvars.len())]),
            };
        }
        let sub = |g: &mut Self, rng: &mut R| g.real(rng, depth - 1, rvars, qvars);
        match rng.gen_range(0..5) {
            0 => FExpr::bin(Op::Add, sub(self, rng), sub(self, rng)),
            1 => FExpr::bin(Op::Mul, sub(self, rng), sub(self, rng)),
            2 => FExpr::bin(Op::CAdd, sub(self, rng), sub(self, rng)),
            3 => {
                let v = self.q(rng, 2, qvars);
                FExpr::Bary(Box::new(sub(self, rng)), Box::new(v), Box::new(sub(self, rng)))
            }
            _ => sub(self, rng),
        }
    }

    pub fn formula<R: Rng>(&mut self, rng: &mut R, depth: usize, rvars: &[&str], qvars: &[&str]) -> Formula {
        let atom = |g: &mut Self, rng: &mut R| match rng.gen_range(0..4) {
            0 => Formula::atom(Rel::Eq, g.q(rng, 2, qvars), g.q(rng, 2, qvars)),
            1 => Formula::atom(Rel::Eq, g.real(rng, 2, rvars, qvars), g.real(rng, 2, rvars, qvars)),
            _ => Formula::atom(Rel::Le, g.real(rng, 2, rvars, qvars), g.real(rng, 2, rvars, qvars)),
        };
        if depth == 0 {
            return atom(self, rng);
        }
        match rng.gen_range(0..7) {
            0 => Formula::not(self.formula(rng, depth - 1, rvars, qvars)),
            1 => Formula::And(Box::new(self.formula(rng, depth - 1, rvars, qvars)), Box::new(self.formula(rng, depth - 1, rvars, qvars))),
            2 => Formula::Or(Box::new(self.formula(rng, depth - 1, rvars, qvars)), Box::new(self.formula(rng, depth - 1, rvars, qvars))),
            3 => Formula::implies(self.formula(rng, depth - 1, rvars, qvars), self.formula(rng, depth - 1, rvars, qvars)),
            4 | 5 if self.quantifiers => {
                self.next += 1;
                let w = format!("W{}", self.next);
                let mut inner = rvars.to_vec();
                inner.push(&w);
                let body = self.formula(rng, depth - 1, &inner, qvars);
                if rng.gen_bool(0.5) {
                    Formula::forall(&w, qetlab_core::cs::CsType::RInf, body)
                } else {
                    Formula::exists(&w, qetlab_core::cs::CsType::RInf, body)
                }
            }
            _ => atom(self, rng),
        }
    }
}
