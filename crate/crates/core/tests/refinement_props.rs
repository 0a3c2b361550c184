mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::gen::{CsGen, FormulaGen};
use proptest::prelude::*;
use qetlab_core::cost::instance_rplus;
use qetlab_core::cs::{cs_pretty, denote_closed_cost, CsTerm, CsType, Den, Env};
use qetlab_core::decls::Decls;
use qetlab_core::linalg::QState;
use qetlab_core::refinement::{
    admissible, check_refined, eval_expr, eval_formula, parse_fexpr, Defs, FExpr, FVal, Formula, OracleConfig, Op,
    RefContext, RefType, Rel, Structure, Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn defs() -> Defs {
    Defs::new(Decls::new(), Structure::RealsPlus)
}

fn bound_type(e: FExpr) -> RefType {
    let phi = Formula::atom(Rel::Le, FExpr::var("Z"), e);
    RefType::arrow("X", RefType::plain(CsType::basic("Q")), RefType::base(CsType::K, "Z", phi))
}

fn cfg(samples: usize, seed: u64) -> OracleConfig {
    OracleConfig { samples, seed, ..OracleConfig::default() }
}

/// Checks `lam X. body` against `(X:Q) ⇒ {Z | Z ≤ e}` and, unless refuted,
/// evaluates the body directly on fresh states.
fn shadow(body: &CsTerm, e: &FExpr, seed: u64, fresh: usize) -> Result<Verdict, String> {
    let d = defs();
    let term = CsTerm::lam("X", body.clone());
    let report = check_refined(&d, &RefContext::new(), &term, &bound_type(e.clone()), &cfg(300, seed)).map_err(|e| e.to_string())?;
    match &report.verdict {
        Verdict::Falsified(w) => {
            if !w.replay(&d) {
                return Err(format!("witness does not replay: {}", report.verdict));
            }
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf4e5);
            for _ in 0..fresh {
                let psi = QState::random(rng.gen_range(1..=3), &mut rng);
                let env = Env::empty().bind("X", Den::Quantum(psi.clone()));
                let v = denote_closed_cost(&instance_rplus(), &d.decls, body, &env, 64, 1e-12).map_err(|e| e.to_string())?;
                let rho: BTreeMap<String, FVal> = [("X".to_string(), FVal::State(psi))].into();
                let FVal::Real(b) = eval_expr(&d, &rho, e)? else { return Err("bound is not real".into()) };
                let got = v.value.to_f64();
                if got > b + 1e-9 * b.abs().max(1.0) {
                    return Err(format!("{}: claimed {} but found {got} > {b}", cs_pretty(body), report.verdict));
                }
            }
        }
    }
    Ok(report.verdict)
}

fn random_bound<R: Rng>(rng: &mut R) -> FExpr {
    let a = (rng.gen::<f64>() * 6.0 * 100.0).round() / 100.0;
    let b = (rng.gen::<f64>() * 6.0 * 100.0).round() / 100.0;
    let p = ["p1(X)", "p0(X)", "p1(H(X))"][rng.gen_range(0..3)];
    parse_fexpr(&Decls::new(), &format!("{a} + {b} * {p}")).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn accepted_bounds_hold_on_fresh_states(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = CsGen::new(2.0);
        g.rec = false;
        let body = g.k(&mut rng, 3, &["X".to_string()]);
        let e = random_bound(&mut rng);
        let r = shadow(&body, &e, seed, 100);
        prop_assert!(r.is_ok(), "{}", r.unwrap_err());
        // a bound above every reachable value is never refuted
        let r = shadow(&body, &FExpr::Num(1000.0), seed, 10);
        prop_assert!(matches!(r, Ok(ref v) if !v.is_falsified()), "{}: {r:?}", cs_pretty(&body));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn formula_substitution_with_compound_values(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = FormulaGen::new(false);
        let phi = g.formula(&mut rng, 3, &["R"], &["X", "Y"]);
        let v = g.q(&mut rng, 3, &["Y"]);
        let d = defs();
        let mut rho: BTreeMap<String, FVal> = BTreeMap::new();
        rho.insert("Y".into(), FVal::State(QState::random(2, &mut rng)));
        rho.insert("R".into(), FVal::Real(rng.gen::<f64>() * 3.0));
        let lhs = eval_formula(&d, &rho, &phi.subst("X", &v));
        let mut ext = rho.clone();
        ext.insert("X".into(), eval_expr(&d, &rho, &v).unwrap());
        let rhs = eval_formula(&d, &ext, &phi);
        prop_assert_eq!(lhs, rhs, "{}", phi);
    }

    #[test]
    fn formula_substitution_under_quantifiers(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = FormulaGen::new(true);
        let phi = g.formula(&mut rng, 3, &["R"], &["X"]);
        let d = defs();
        let psi = QState::random(rng.gen_range(1..=2), &mut rng);
        let r = rng.gen::<f64>() * 3.0;
        let rho: BTreeMap<String, FVal> = [("R".to_string(), FVal::Real(r))].into();
        let lhs = eval_formula(&d, &rho, &phi.subst("X", &FExpr::Ket(psi.clone())));
        let mut ext = rho.clone();
        ext.insert("X".into(), FVal::State(psi));
        prop_assert_eq!(lhs, eval_formula(&d, &ext, &phi), "{}", phi);
        // substituting a real for R
        let lhs = eval_formula(&d, &ext, &phi.subst("R", &FExpr::Num(r)));
        prop_assert_eq!(lhs, eval_formula(&d, &ext, &phi), "{}", phi);
    }

    #[test]
    fn formula_substitution_avoids_capture(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = FormulaGen::new(true);
        let phi = g.formula(&mut rng, 3, &["R"], &["X"]);
        // the replacement mentions names the generator binds
        let v = FExpr::bin(Op::Add, FExpr::var("W1"), FExpr::var("W2"));
        let s = phi.subst("R", &v);
        let mut want: BTreeSet<String> = phi.free_vars();
        if want.remove("R") {
            want.extend(v.free_vars());
        }
        prop_assert_eq!(s.free_vars(), want, "{}", phi);
    }

    #[test]
    fn type_substitution(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = FormulaGen::new(true);
        let phi = g.formula(&mut rng, 2, &["Z"], &["X"]);
        let t = RefType::arrow("Y", RefType::plain(CsType::basic("Q")), RefType::base(CsType::K, "Z", phi));
        let psi = QState::random(2, &mut rng);
        let st = t.subst("X", &FExpr::Ket(psi.clone()));
        prop_assert_eq!(st.skeleton(), t.skeleton());
        let (RefType::Arrow { cod: c0, .. }, RefType::Arrow { cod: c1, .. }) = (&t, &st) else { unreachable!() };
        let (RefType::Base { phi: p0, .. }, RefType::Base { z, phi: p1, .. }) = (&**c0, &**c1) else { unreachable!() };
        let d = defs();
        for zv in [0.0, 0.5, 1.0, 2.5, f64::INFINITY] {
            let rho: BTreeMap<String, FVal> = [(z.clone(), FVal::Real(zv))].into();
            let mut ext = rho.clone();
            ext.insert("X".into(), FVal::State(psi.clone()));
            prop_assert_eq!(eval_formula(&d, &rho, p1), eval_formula(&d, &ext, p0));
        }
    }

    #[test]
    fn admissibility_is_monotone_in_the_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = FormulaGen::new(false);
        let e = g.real(&mut rng, 3, &["R"], &["X"]);
        let extra = g.real(&mut rng, 2, &["R"], &["X"]);
        let ty = |b: FExpr| RefType::arrow(
            "X",
            RefType::plain(CsType::basic("Q")),
            RefType::arrow("R", RefType::plain(CsType::K), RefType::base(CsType::K, "Z", Formula::atom(Rel::Le, FExpr::var("Z"), b))),
        );
        prop_assert!(admissible(&ty(e.clone())).admissible);
        prop_assert!(admissible(&ty(FExpr::bin(Op::Add, e.clone(), extra.clone()))).admissible);
        prop_assert!(admissible(&ty(FExpr::bin(Op::CAdd, extra, e.clone()))).admissible);
        let self_ref = FExpr::bin(Op::Add, e, FExpr::var("Z"));
        prop_assert!(!admissible(&ty(self_ref)).admissible);
    }
}

#[test]
fn shadow_sees_both_verdicts() {
    let (mut refuted, mut kept) = (0, 0);
    for seed in 0..80u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = CsGen::new(2.0);
        g.rec = false;
        let body = g.k(&mut rng, 3, &["X".to_string()]);
        let e = random_bound(&mut rng);
        match shadow(&body, &e, seed, 50) {
            Ok(v) if v.is_falsified() => refuted += 1,
            Ok(_) => kept += 1,
            Err(e) => panic!("{e}"),
        }
    }
    assert!(refuted >= 5 && kept >= 5, "refuted {refuted}, kept {kept}");
}
