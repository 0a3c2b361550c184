//! Bundled example programs with their expected analysis results.

use serde::Serialize;

use crate::cs::parse_cs_term;
use crate::soundness::{check_expected_cost, check_expected_value, ComparisonReport, HarnessConfig};
use crate::source::{parse_program, parse_term, parse_type, Program, Term};
use crate::typecheck::{check_program, check_term, input_contexts, TypeErrorKind};

/// One closing substitution and the values expected under it.
#[derive(Debug, Clone, Copy)]
pub struct GoldenCase {
    /// Input overrides as `(name, value)` in source syntax.
    pub sigma: &'static [(&'static str, &'static str)],
    pub ecost: Option<f64>,
    pub evalue: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub enum Expectation {
    Accept {
        /// Type of the main term.
        ty: &'static str,
        /// Type of the function at the head of the main term.
        head_ty: Option<&'static str>,
        /// Auxiliary `.csl` file holding the continuation for `evalue`.
        continuation: Option<&'static str>,
        cases: &'static [GoldenCase],
    },
    Reject(TypeErrorKind),
}

#[derive(Debug, Clone, Copy)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub file: &'static str,
    pub source: &'static str,
    pub expect: Expectation,
}

macro_rules! corpus_src {
    ($f:literal) => {
        ($f, include_str!(concat!("../corpus/", $f)))
    };
}

/// Every file shipped in the corpus directory, by file name.
pub const FILES: &[(&str, &str)] = &[
    corpus_src!("biased_geometric.aql"),
    corpus_src!("clone.aql"),
    corpus_src!("cointoss.aql"),
    corpus_src!("ecost.csl"),
    corpus_src!("ecost.rty"),
    corpus_src!("ecost_weak.rty"),
    corpus_src!("grover1.aql"),
    corpus_src!("grover1_err.csl"),
    corpus_src!("grover2.aql"),
    corpus_src!("grover2_err.csl"),
    corpus_src!("grover3.aql"),
    corpus_src!("grover3_err.csl"),
    corpus_src!("lam_tick.aql"),
    corpus_src!("meas_cascade.aql"),
    corpus_src!("meas_indicator.aql"),
    corpus_src!("meas_indicator_k.csl"),
    corpus_src!("nat_repeat.aql"),
    corpus_src!("nested_case.aql"),
    corpus_src!("pure_value.aql"),
    corpus_src!("qwalk_h.aql"),
    corpus_src!("tick_chain.aql"),
];

pub fn corpus_file(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(f, _)| *f == name).map(|(_, s)| *s)
}

const NO_SIGMA: &[(&str, &str)] = &[];

const fn ecost(e: f64) -> GoldenCase {
    GoldenCase { sigma: NO_SIGMA, ecost: Some(e), evalue: None }
}

/// A single unparameterised case with a golden expected cost.
macro_rules! ecost {
    ($e:expr) => {{
        const CASES: &[GoldenCase] = &[ecost($e)];
        CASES
    }};
}

const NAT: [&str; 3] = ["0", "s(0;)", "s(s(0;);)"];

/// `cos²((2i+1)·asin(2^{-n/2}))`.
pub fn grover_error(n: u32, i: u32) -> f64 {
    let theta = (1.0 / f64::from(1u32 << n).sqrt()).asin();
    (f64::from(2 * i + 1) * theta).cos().powi(2)
}

const fn grover_table(err: [f64; 3]) -> [GoldenCase; 3] {
    [
        GoldenCase { sigma: &[("m", NAT[0])], ecost: Some(0.0), evalue: Some(err[0]) },
        GoldenCase { sigma: &[("m", NAT[1])], ecost: Some(0.0), evalue: Some(err[1]) },
        GoldenCase { sigma: &[("m", NAT[2])], ecost: Some(0.0), evalue: Some(err[2]) },
    ]
}

const GROVER1_ERR: [f64; 3] = [0.5, 0.5, 0.5];
const GROVER2_ERR: [f64; 3] = [0.75, 0.0, 0.75];
const GROVER3_ERR: [f64; 3] = [0.875, 0.21875, 0.0546875];
const GROVER1: [GoldenCase; 3] = grover_table(GROVER1_ERR);
const GROVER2: [GoldenCase; 3] = grover_table(GROVER2_ERR);
const GROVER3: [GoldenCase; 3] = grover_table(GROVER3_ERR);

pub fn corpus() -> Vec<CorpusEntry> {
    let entry = |name: &'static str, file: &'static str, expect| CorpusEntry {
        name,
        file,
        source: corpus_file(file).expect("listed in FILES"),
        expect,
    };
    let accept = |ty, head_ty, cases| Expectation::Accept { ty, head_ty, continuation: None, cases };
    let grover = |n: usize, cases| {
        let files = [("grover1", "grover1.aql", "grover1_err.csl"), ("grover2", "grover2.aql", "grover2_err.csl"), ("grover3", "grover3.aql", "grover3_err.csl")];
        let (name, file, k) = files[n - 1];
        entry(name, file, Expectation::Accept { ty: "Q", head_ty: Some("Nat => Q -o Q"), continuation: Some(k), cases })
    };
    vec![
        entry("cointoss", "cointoss.aql", accept("Q", Some("Q -o Q"), ecost!(1.5))),
        entry("qwalk_h", "qwalk_h.aql", accept("Q", Some("Q -o (Q -o Q) => Q"), ecost!(1.5))),
        grover(1, &GROVER1),
        grover(2, &GROVER2),
        grover(3, &GROVER3),
        entry("tick_chain", "tick_chain.aql", accept("Q", None, ecost!(3.0))),
        entry("meas_cascade", "meas_cascade.aql", accept("Q", None, ecost!(5.0 / 3.0))),
        entry("nat_repeat", "nat_repeat.aql", accept("Q", Some("Nat => Q -o Q"), ecost!(3.0))),
        entry("pure_value", "pure_value.aql", accept("Q", None, ecost!(0.0))),
        entry("lam_tick", "lam_tick.aql", accept("Q", Some("Q -o Q"), ecost!(1.0))),
        entry("biased_geometric", "biased_geometric.aql", accept("Q", Some("Q -o Q"), ecost!(7.0 / 3.0))),
        entry("nested_case", "nested_case.aql", accept("Coin", None, ecost!(1.5))),
        entry(
            "meas_indicator",
            "meas_indicator.aql",
            Expectation::Accept {
                ty: "Out",
                head_ty: None,
                continuation: Some("meas_indicator_k.csl"),
                cases: &[GoldenCase { sigma: NO_SIGMA, ecost: Some(0.0), evalue: Some(0.75) }],
            },
        ),
        entry("clone", "clone.aql", Expectation::Reject(TypeErrorKind::LinearityViolation)),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusCheck {
    pub what: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CorpusOutcome {
    pub name: String,
    pub file: String,
    pub checks: Vec<CorpusCheck>,
    pub reports: Vec<ComparisonReport>,
    pub pass: bool,
}

fn head(t: &Term) -> &Term {
    match t {
        Term::App(f, _) => head(f),
        _ => t,
    }
}

fn close_enough(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

struct Recorder {
    checks: Vec<CorpusCheck>,
}

impl Recorder {
    fn push(&mut self, what: impl Into<String>, expected: impl ToString, actual: impl ToString, pass: bool) {
        self.checks.push(CorpusCheck { what: what.into(), expected: expected.to_string(), actual: actual.to_string(), pass });
    }
}

fn sigma_of(p: &Program, case: &GoldenCase) -> Result<Vec<(String, Term)>, String> {
    case.sigma
        .iter()
        .map(|(x, v)| parse_term(&p.decls, v).map(|t| (x.to_string(), t)).map_err(|e| e.to_string()))
        .collect()
}

/// Runs every golden check of an entry.
pub fn verify_entry(e: &CorpusEntry, cfg: HarnessConfig) -> CorpusOutcome {
    let mut rec = Recorder { checks: Vec::new() };
    let mut reports = Vec::new();
    let finish = |rec: Recorder, reports| {
        let pass = rec.checks.iter().all(|c| c.pass);
        CorpusOutcome { name: e.name.into(), file: e.file.into(), checks: rec.checks, reports, pass }
    };
    let prog = match parse_program(e.source) {
        Ok(p) => p,
        Err(err) => {
            rec.push("parse", "ok", err, false);
            return finish(rec, reports);
        }
    };
    let (ty, head_ty, continuation, cases) = match e.expect {
        Expectation::Reject(kind) => {
            let got = match check_program(&prog, None) {
                Ok(ty) => format!("accepted at {ty}"),
                Err(errs) => errs.iter().map(|e| e.kind.to_string()).collect::<Vec<_>>().join(", "),
            };
            let pass = matches!(check_program(&prog, None), Err(errs) if errs.iter().any(|e| e.kind == kind));
            rec.push("reject", kind, got, pass);
            return finish(rec, reports);
        }
        Expectation::Accept { ty, head_ty, continuation, cases } => (ty, head_ty, continuation, cases),
    };
    let want = parse_type(ty).expect("golden type parses");
    match check_program(&prog, None) {
        Ok(got) => rec.push("type", ty, &got, got == want),
        Err(errs) => rec.push("type", ty, errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "), false),
    }
    if let (Some(hty), Some(term)) = (head_ty, &prog.term) {
        let want = parse_type(hty).expect("golden type parses");
        let (gamma, delta) = input_contexts(&prog);
        let r = check_term(&prog.decls, &gamma, &delta, head(term), &want);
        rec.push("head type", hty, r.as_ref().map(|_| hty.to_string()).unwrap_or_else(|e| e.to_string()), r.is_ok());
    }
    let k = match continuation.map(|f| parse_cs_term(&prog.decls, corpus_file(f).expect("listed in FILES"))) {
        Some(Ok(k)) => Some(k),
        Some(Err(err)) => {
            rec.push("continuation", "parses", err, false);
            None
        }
        None => None,
    };
    for (i, case) in cases.iter().enumerate() {
        let label = if case.sigma.is_empty() {
            String::new()
        } else {
            format!(" [{}]", case.sigma.iter().map(|(x, v)| format!("{x} = {v}")).collect::<Vec<_>>().join(", "))
        };
        let sigma = match sigma_of(&prog, case) {
            Ok(s) => s,
            Err(err) => {
                rec.push(format!("case {i}"), "input parses", err, false);
                continue;
            }
        };
        if let Some(golden) = case.ecost {
            match check_expected_cost(e.name, &prog, &sigma, cfg) {
                Ok(r) => {
                    rec.push(format!("compare ecost{label}"), format!("gap <= {}", r.tol), r.gap, r.pass);
                    let ok = close_enough(r.denotational, golden, cfg.tol);
                    rec.push(format!("ecost{label}"), golden, r.denotational, ok);
                    reports.push(r);
                }
                Err(err) => rec.push(format!("ecost{label}"), golden, err, false),
            }
        }
        if let (Some(golden), Some(k)) = (case.evalue, &k) {
            match check_expected_value(e.name, &prog, &sigma, k, cfg) {
                Ok(r) => {
                    rec.push(format!("compare evalue{label}"), format!("gap <= {}", r.tol), r.gap, r.pass);
                    let ok = close_enough(r.denotational, golden, cfg.tol);
                    rec.push(format!("evalue{label}"), golden, r.denotational, ok);
                    reports.push(r);
                }
                Err(err) => rec.push(format!("evalue{label}"), golden, err, false),
            }
        }
    }
    finish(rec, reports)
}
