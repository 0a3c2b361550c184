mod common;

use common::corpus::{accepted, golden_instances};
use common::gen::SourceGen;
use proptest::prelude::*;
use qetlab_core::corpus::{corpus_file, Expectation};
use qetlab_core::cs::{cs_alpha_eq, cs_check, cs_pretty, parse_cs_term, CsTerm, CsType, CsTypeOptions};
use qetlab_core::linalg::QState;
use qetlab_core::qet::{cs_var, translate_term, translate_type, translate_value, zero_continuation};
use qetlab_core::soundness::{check_cost_plus_value, check_expected_cost, check_expected_value, HarnessConfig};
use qetlab_core::source::{parse_program, pretty, Program, SType, Term};
use qetlab_core::typecheck::check_term;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const OPTS: CsTypeOptions = CsTypeOptions { k_is_real: true };

fn q() -> SType {
    SType::basic("Q")
}

/// A random program of type `Q` over one input `y : Q`.
fn program(seed: u64) -> (Program, Term) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = SourceGen::new(2).q(&mut rng, 4, Some("y"));
    let psi = QState::random(rng.gen_range(1..=3), &mut rng);
    let src = format!("input y : Q = {};\nmain : Q\n{}", pretty(&Term::Ket(psi)), pretty(&t));
    (parse_program(&src).unwrap(), t)
}

#[test]
fn corpus_translations_are_well_typed() {
    for e in accepted() {
        let Expectation::Accept { continuation, .. } = e.expect else { unreachable!() };
        let p = parse_program(e.source).unwrap();
        let open = p.term.clone().unwrap();
        let theta: Vec<(String, CsType)> = p.inputs.iter().map(|i| (cs_var(&i.name), translate_type(&i.ty))).collect();
        let mut ks = vec![zero_continuation()];
        if let Some(f) = continuation {
            ks.push(parse_cs_term(&p.decls, corpus_file(f).unwrap()).unwrap());
        }
        for k in &ks {
            let t = translate_term(&open, k).unwrap();
            cs_check(&p.decls, &theta, &t, &CsType::K, OPTS).unwrap_or_else(|err| panic!("{}: {err}", e.name));
        }
    }
}

#[test]
fn closed_corpus_values_translate_at_their_types() {
    for i in golden_instances() {
        for (x, ty, v) in &i.closed.sigma {
            let cv = translate_value(v).unwrap();
            cs_check(&i.closed.decls, &[], &cv, &translate_type(ty), CsTypeOptions::default())
                .unwrap_or_else(|err| panic!("{}: input {x}: {err}", i.label));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_programs_are_well_typed(seed in any::<u64>()) {
        let (p, t) = program(seed);
        let r = check_term(&p.decls, &[], &[("y".to_string(), q())], &t, &q());
        prop_assert!(r.is_ok(), "{}: {:?}", pretty(&t), r.err());
    }

    #[test]
    fn translation_preserves_typing(seed in any::<u64>(), c in 0.0..1.0f64) {
        let (p, t) = program(seed);
        let theta = vec![("Y".to_string(), CsType::basic("Q"))];
        for k in [zero_continuation(), CsTerm::lam("Z", CsTerm::Real(c))] {
            let out = translate_term(&t, &k).unwrap();
            let r = cs_check(&p.decls, &theta, &out, &CsType::K, OPTS);
            prop_assert!(r.is_ok(), "{}\n{}\n{:?}", pretty(&t), cs_pretty(&out), r.err());
        }
    }

    #[test]
    fn values_translate_to_a_single_continuation_call(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let body = SourceGen::new(1).q(&mut rng, 3, Some("x"));
        for v in [Term::lam("x", body), Term::Ket(QState::random(2, &mut rng))] {
            let k = CsTerm::var("K");
            let out = translate_term(&v, &k).unwrap();
            let want = CsTerm::app(k, translate_value(&v).unwrap());
            prop_assert!(cs_alpha_eq(&out, &want, 0.0));
        }
    }

    #[test]
    fn operational_and_denotational_sides_agree(seed in any::<u64>(), c in 0.0..1.0f64) {
        let (p, t) = program(seed);
        let cfg = HarnessConfig { depth: 100, budget: 64, tol: 1e-6 };
        let r = check_expected_cost("random", &p, &[], cfg).unwrap();
        prop_assert!(r.pass, "{}\n{r:?}", pretty(&t));
        let f = CsTerm::lam("Z", CsTerm::Real(c));
        let r = check_expected_value("random", &p, &[], &f, cfg).unwrap();
        prop_assert!(r.pass, "{}\n{r:?}", pretty(&t));
        let r = check_cost_plus_value("random", &p, &[], &f, cfg).unwrap();
        prop_assert!(r.pass, "{}\n{r:?}", pretty(&t));
    }
}

#[test]
fn generated_programs_are_not_trivial() {
    let mut costs = 0;
    let mut loops = 0;
    for seed in 0..64 {
        let (p, t) = program(seed);
        let r = check_expected_cost("random", &p, &[], HarnessConfig { depth: 100, budget: 64, tol: 1e-6 }).unwrap();
        costs += usize::from(r.operational > 0.0);
        loops += usize::from(pretty(&t).contains("letrec"));
    }
    assert!(costs > 16 && loops > 8, "{costs} costly, {loops} with loops");
}
