//! Operational versus denotational comparison.
//!
//! For a closed program `tσ` of basic type, the expected cost computed by
//! running the rewrite system must equal the denotation of
//! `qet[t]{λZ. 0}` over the extended reals, and the expected value of a
//! continuation `f` must equal the denotation of `qet[t]{f}` over a
//! forgetful cost structure. Both sides are computed as converging lower
//! bounds; reports carry residual mass and convergence flags.

use serde::Serialize;
use thiserror::Error;

use crate::cost::{instance_rplus, instance_unit_forgetful, CostStructure};
use crate::cs::denote::DenoteError;
use crate::cs::{cs_check, cs_pretty, denote_closed_cost, CsTerm, CsType, CsTypeError, CsTypeOptions, Den, Env};
use crate::decls::Decls;
use crate::pars::{self, ParsError};
use crate::qet::{cs_var, translate_term, translate_type, translate_value, zero_continuation, QetError};
use crate::source::{Program, SType, Term};
use crate::typecheck::{check_program, TypeError};

pub const DEFAULT_DEPTH: usize = 40;
pub const DEFAULT_BUDGET: usize = 64;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("program is not of basic type: {0}")]
    HypothesisViolation(String),
    #[error("program does not type-check: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    IllTyped(Vec<TypeError>),
    #[error("free variable `{0}` has no closing value")]
    Unclosed(String),
    #[error("continuation: {0}")]
    Continuation(CsTypeError),
    #[error("translation is ill-typed: {0}")]
    Translation(CsTypeError),
    #[error(transparent)]
    Qet(#[from] QetError),
    #[error(transparent)]
    Pars(#[from] ParsError),
    #[error(transparent)]
    Denote(#[from] DenoteError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Observable {
    ExpectedCost,
    ExpectedValue,
    CostPlusValue,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub program: String,
    pub observable: Observable,
    pub operational: f64,
    pub depth: usize,
    /// Mass not in normal form at `depth`.
    pub residual_mass: f64,
    pub denotational: f64,
    pub budget: usize,
    pub converged: bool,
    pub gap: f64,
    pub tol: f64,
    pub pass: bool,
}

impl ComparisonReport {
    fn new(
        program: &str,
        observable: Observable,
        op: f64,
        run: &pars::RunReport,
        den: f64,
        budget: usize,
        converged: bool,
        tol: f64,
    ) -> Self {
        let both_infinite = op.is_infinite() && den.is_infinite();
        let gap = if both_infinite { 0.0 } else { (op - den).abs() };
        let divergent = op > crate::cost::DIVERGENCE_THRESHOLD && (den.is_infinite() || !converged);
        ComparisonReport {
            program: program.to_string(),
            observable,
            operational: op,
            depth: run.depth,
            residual_mass: run.residual_mass(),
            denotational: den,
            budget,
            converged,
            gap,
            tol,
            pass: gap <= tol || both_infinite || divergent,
        }
    }
}

/// Knobs shared by every comparison.
#[derive(Debug, Clone, Copy)]
pub struct HarnessConfig {
    pub depth: usize,
    pub budget: usize,
    pub tol: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig { depth: DEFAULT_DEPTH, budget: DEFAULT_BUDGET, tol: DEFAULT_TOL }
    }
}

/// The program's main term together with its closing substitution, after
/// checking that it has basic type.
pub struct Closed {
    pub decls: Decls,
    pub open: Term,
    pub closed: Term,
    /// Source name, source type and closing value.
    pub sigma: Vec<(String, SType, Term)>,
    pub ty: String,
}

/// Type-checks `prog` and closes its main term with the input values
/// overridden by `sigma`.
pub fn close_program(prog: &Program, sigma: &[(String, Term)]) -> Result<Closed, HarnessError> {
    let ty = check_program(prog, None).map_err(HarnessError::IllTyped)?;
    let SType::Basic(b) = &ty else {
        return Err(HarnessError::HypothesisViolation(ty.to_string()));
    };
    let open = prog.term.clone().expect("checked programs have a main term");
    let mut subst = Vec::new();
    for input in &prog.inputs {
        let v = sigma
            .iter()
            .find(|(x, _)| x == &input.name)
            .map(|(_, v)| v.clone())
            .or_else(|| input.value.clone());
        if let Some(v) = v {
            subst.push((input.name.clone(), input.ty.clone(), v));
        }
    }
    for x in open.free_vars() {
        if !subst.iter().any(|(y, _, _)| y == &x) {
            return Err(HarnessError::Unclosed(x));
        }
    }
    let pairs: Vec<(String, Term)> = subst.iter().map(|(x, _, v)| (x.clone(), v.clone())).collect();
    Ok(Closed { decls: prog.decls.clone(), closed: open.subst(&pairs), open, sigma: subst, ty: b.clone() })
}

/// Translated closing values `𝒱(v)` keyed by their cost-structure names.
fn sigma_values(c: &Closed) -> Result<Vec<(String, CsTerm)>, HarnessError> {
    c.sigma.iter().map(|(x, _, v)| Ok((cs_var(x), translate_value(v)?))).collect()
}

/// `ρ_σ`: every translated value denoted in the empty valuation.
fn valuation<'a, K: CostStructure<Scalar = f64>>(
    cs: &K,
    decls: &Decls,
    vals: &'a [(String, CsTerm)],
    budget: usize,
) -> Result<Env<'a, K::Elem>, HarnessError> {
    let mut pairs = Vec::new();
    for (x, v) in vals {
        let d = crate::cs::denote(cs, decls, v, &Env::empty(), budget)?;
        pairs.push((x.clone(), d.value));
    }
    Ok(Env::from_pairs(pairs))
}

/// Translation context `𝒯(Γ), 𝒯(Δ)` for the closing substitution.
fn theta(c: &Closed) -> Vec<(String, CsType)> {
    c.sigma.iter().map(|(x, ty, _)| (cs_var(x), translate_type(ty))).collect()
}

/// Denotes a closed cost term over `cs` by iterative deepening.
fn cost_of<K: CostStructure<Scalar = f64>>(
    cs: &K,
    decls: &Decls,
    t: &CsTerm,
    vals: &[(String, CsTerm)],
    budget: usize,
) -> Result<(f64, bool), HarnessError> {
    let env = valuation(cs, decls, vals, budget)?;
    let r = denote_closed_cost(cs, decls, t, &env, budget, 1e-9)?;
    Ok((cs.to_real(&r.value).to_f64(), r.converged))
}

pub fn check_expected_cost(name: &str, prog: &Program, sigma: &[(String, Term)], cfg: HarnessConfig) -> Result<ComparisonReport, HarnessError> {
    let c = close_program(prog, sigma)?;
    let run = pars::run(&c.decls, &c.closed, cfg.depth)?;
    let t = translate_term(&c.open, &zero_continuation())?;
    cs_check(&c.decls, &theta(&c), &t, &CsType::K, CsTypeOptions { k_is_real: true }).map_err(HarnessError::Translation)?;
    let vals = sigma_values(&c)?;
    let (den, converged) = cost_of(&instance_rplus(), &c.decls, &t, &vals, cfg.budget)?;
    Ok(ComparisonReport::new(name, Observable::ExpectedCost, run.accumulated_cost, &run, den, cfg.budget, converged, cfg.tol))
}

fn check_continuation(c: &Closed, f: &CsTerm) -> Result<(), HarnessError> {
    let want = CsType::arrow(CsType::Basic(c.ty.clone()), CsType::K);
    cs_check(&c.decls, &[], f, &want, CsTypeOptions { k_is_real: true }).map_err(HarnessError::Continuation)?;
    if !f.is_value() {
        return Err(HarnessError::Continuation(CsTypeError {
            kind: crate::cs::CsTypeErrorKind::OperandNotValue,
            msg: "continuation must be a value".into(),
            term: Some(cs_pretty(f)),
        }));
    }
    Ok(())
}

/// `Σ_b nf(b) · ⟦f⟧(⟦𝒱(b)⟧)` over `cs`.
fn operational_value<K: CostStructure<Scalar = f64>>(
    cs: &K,
    decls: &Decls,
    nf: &pars::WeightedDist,
    f: &CsTerm,
    budget: usize,
) -> Result<K::Elem, HarnessError> {
    let mut err = None;
    let v = pars::evalue_of(cs, nf, |b| {
        let applied = match translate_value(b) {
            Ok(vb) => CsTerm::app(f.clone(), vb),
            Err(e) => {
                err = Some(HarnessError::from(e));
                return Ok(cs.bottom());
            }
        };
        match denote_closed_cost(cs, decls, &applied, &Env::empty(), budget, 1e-12) {
            Ok(r) => Ok(r.value),
            Err(e) => {
                err = Some(e.into());
                Ok(cs.bottom())
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// Expected value of `f` over the forgetful unit interval.
pub fn check_expected_value(
    name: &str,
    prog: &Program,
    sigma: &[(String, Term)],
    f: &CsTerm,
    cfg: HarnessConfig,
) -> Result<ComparisonReport, HarnessError> {
    let c = close_program(prog, sigma)?;
    check_continuation(&c, f)?;
    let cs = instance_unit_forgetful();
    let run = pars::run(&c.decls, &c.closed, cfg.depth)?;
    let op = operational_value(&cs, &c.decls, &run.normal_forms, f, cfg.budget)?;
    let t = translate_term(&c.open, f)?;
    cs_check(&c.decls, &theta(&c), &t, &CsType::K, CsTypeOptions { k_is_real: true }).map_err(HarnessError::Translation)?;
    let vals = sigma_values(&c)?;
    let (den, converged) = cost_of(&cs, &c.decls, &t, &vals, cfg.budget)?;
    Ok(ComparisonReport::new(name, Observable::ExpectedValue, op, &run, den, cfg.budget, converged, cfg.tol))
}

/// `⟦qet[t]{f}⟧ = ecost + evalue(⟦f⟧)` over the extended reals.
pub fn check_cost_plus_value(
    name: &str,
    prog: &Program,
    sigma: &[(String, Term)],
    f: &CsTerm,
    cfg: HarnessConfig,
) -> Result<ComparisonReport, HarnessError> {
    let c = close_program(prog, sigma)?;
    check_continuation(&c, f)?;
    let cs = instance_rplus();
    let run = pars::run(&c.decls, &c.closed, cfg.depth)?;
    let ev = operational_value(&cs, &c.decls, &run.normal_forms, f, cfg.budget)?;
    let op = cs.cadd(&crate::cost::ExtReal::Finite(run.accumulated_cost), &ev).to_f64();
    let t = translate_term(&c.open, f)?;
    let vals = sigma_values(&c)?;
    let (den, converged) = cost_of(&cs, &c.decls, &t, &vals, cfg.budget)?;
    Ok(ComparisonReport::new(name, Observable::CostPlusValue, op, &run, den, cfg.budget, converged, cfg.tol))
}

/// Applies a closed CS function to a source value: `⟦f⟧(⟦𝒱(v)⟧)` over `cs`.
pub fn apply_to_value<K: CostStructure<Scalar = f64>>(
    cs: &K,
    decls: &Decls,
    f: &CsTerm,
    v: &Term,
    budget: usize,
) -> Result<f64, HarnessError> {
    let t = CsTerm::app(f.clone(), translate_value(v)?);
    let r = denote_closed_cost(cs, decls, &t, &Env::empty(), budget, 1e-12)?;
    Ok(cs.to_real(&r.value).to_f64())
}

/// Convenience for callers holding only a denotation.
pub fn den_to_f64<K: CostStructure<Scalar = f64>>(cs: &K, d: &Den<'_, K::Elem>) -> Option<f64> {
    match d {
        Den::Cost(e, _) => Some(cs.to_real(e).to_f64()),
        Den::Real(r) => Some(r.to_f64()),
        Den::Bottom => Some(cs.to_real(&cs.bottom()).to_f64()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cs::parse_cs_term;
    use crate::source::parse_program;

    const COINTOSS: &str = "input y : Q = ket[0.5|001> + sqrt(1/2)|011> + 0.5|100>]\n\
        main : Q\n\
        (letrec ct x : Q -o Q = case tick(meas x) of | inj0(;x0) -> x0 | inj1(;x1) -> ct (H x1)) y";

    #[test]
    fn cointoss_cost() {
        let p = parse_program(COINTOSS).unwrap();
        let r = check_expected_cost("cointoss", &p, &[], HarnessConfig::default()).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.denotational - 1.5).abs() < 1e-6);
    }

    #[test]
    fn pure_value() {
        let p = parse_program("ket[|0>]").unwrap();
        let r = check_expected_cost("value", &p, &[], HarnessConfig::default()).unwrap();
        assert!(r.pass && r.operational == 0.0 && r.denotational == 0.0);
    }

    #[test]
    fn measurement_indicator() {
        let p = parse_program("meas ket[0.5|001> + sqrt(1/2)|011> + 0.5|100>]").unwrap();
        let f = parse_cs_term(&p.decls, "lam B. case B of | inj0(Q) -> real 1 | inj1(Q) -> real 0").unwrap();
        let r = check_expected_value("meas", &p, &[], &f, HarnessConfig::default()).unwrap();
        assert!(r.pass && (r.operational - 0.75).abs() < 1e-12, "{r:?}");
        let zero = parse_cs_term(&p.decls, "lam B. real 0").unwrap();
        let r = check_expected_value("meas", &p, &[], &zero, HarnessConfig::default()).unwrap();
        assert!(r.pass && r.operational == 0.0 && r.denotational == 0.0);
    }

    #[test]
    fn cost_plus_value() {
        let p = parse_program(COINTOSS).unwrap();
        let f = parse_cs_term(&p.decls, "lam B. real 2").unwrap();
        let r = check_cost_plus_value("cointoss", &p, &[], &f, HarnessConfig::default()).unwrap();
        assert!(r.pass && (r.denotational - 3.5).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn hypothesis_violation() {
        let p = parse_program("lam x. x").unwrap();
        let e = check_expected_cost("id", &p, &[], HarnessConfig::default());
        assert!(matches!(e, Err(HarnessError::HypothesisViolation(_)) | Err(HarnessError::IllTyped(_))));
    }
}
