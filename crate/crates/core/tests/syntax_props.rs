use std::collections::BTreeSet;

use proptest::prelude::*;
use qetlab_core::corpus::{corpus, FILES};
use qetlab_core::decls::Decls;
use qetlab_core::linalg::QState;
use qetlab_core::source::{alpha_eq, parse_program, parse_term, pretty, Arm, Letrec, SType, Term};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn decls() -> Decls {
    parse_program("data Nat = 0 | s(Nat;)").unwrap().decls
}

fn name() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["x", "y", "z", "f", "q", "x_1"]).prop_map(String::from)
}

fn ket() -> impl Strategy<Value = Term> {
    (1usize..=2, any::<u64>()).prop_map(|(n, seed)| Term::Ket(QState::random(n, &mut ChaCha8Rng::seed_from_u64(seed))))
}

fn stype() -> impl Strategy<Value = SType> {
    let base = prop::sample::select(vec!["Q", "Nat", "Out"]).prop_map(SType::basic);
    base.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| SType::lin(a, b)),
            (inner.clone(), inner).prop_map(|(a, b)| SType::exp(a, b)),
        ]
    })
}

fn term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        4 => name().prop_map(Term::Var),
        1 => ket(),
        1 => Just(Term::Cons("0".into(), vec![], vec![])),
    ];
    leaf.prop_recursive(5, 48, 3, |t| {
        let b = |t: &BoxedStrategy<Term>| t.clone().prop_map(Box::new);
        prop_oneof![
            (name(), b(&t)).prop_map(|(x, body)| Term::Lam(x, body)),
            (b(&t), b(&t)).prop_map(|(f, a)| Term::App(f, a)),
            (prop::sample::select(vec!["H", "X", "CNOT"]), b(&t)).prop_map(|(g, a)| Term::Gate(g.into(), a)),
            b(&t).prop_map(Term::Meas),
            b(&t).prop_map(Term::Tick),
            (b(&t), b(&t)).prop_map(|(a, c)| Term::Tensor(a, c)),
            t.clone().prop_map(|a| Term::Cons("s".into(), vec![a], vec![])),
            t.clone().prop_map(|a| Term::Cons("inj1".into(), vec![], vec![a])),
            (b(&t), name(), t.clone(), name(), t.clone(), prop::option::of((name(), b(&t)))).prop_map(
                |(s, x0, t0, x1, t1, def)| {
                    let arms = vec![
                        Arm { cons: "inj0".into(), classical: vec![], quantum: vec![x0], body: t0 },
                        Arm { cons: "inj1".into(), classical: vec![], quantum: vec![x1], body: t1 },
                    ];
                    Term::Case(s, arms, def)
                }
            ),
            (b(&t), t.clone(), name(), t.clone()).prop_map(|(s, t0, k, t1)| {
                let arms = vec![
                    Arm { cons: "0".into(), classical: vec![], quantum: vec![], body: t0 },
                    Arm { cons: "s".into(), classical: vec![k], quantum: vec![], body: t1 },
                ];
                Term::Case(s, arms, None)
            }),
            (name(), name(), prop::option::of(stype()), t.clone()).prop_map(|(fun, param, ann, body)| {
                Term::Letrec(Box::new(Letrec { fun, param, ann, body }))
            }),
        ]
    })
}

fn binds(t: &Term, x: &str) -> bool {
    match t {
        Term::Lam(y, _) => y == x,
        Term::Letrec(l) => l.fun == x || l.param == x,
        _ => false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn pretty_then_parse_is_identity(t in term()) {
        let src = pretty(&t);
        let back = parse_term(&decls(), &src);
        prop_assert!(back.is_ok(), "{src}: {:?}", back.err());
        let back = back.unwrap();
        prop_assert!(alpha_eq(&t, &back, 1e-9), "{src}\n{}", pretty(&back));
    }

    #[test]
    fn substitution_does_not_capture(t in term(), x in name(), v in term()) {
        let s = t.subst(&[(x.clone(), v.clone())]);
        let mut want: BTreeSet<String> = t.free_vars();
        let occurs = want.remove(&x);
        if occurs {
            want.extend(v.free_vars());
        }
        prop_assert_eq!(s.free_vars(), want);
        if !occurs {
            prop_assert!(alpha_eq(&s, &t, 0.0));
        }
    }

    #[test]
    fn substitution_is_invariant_under_alpha(t in term(), x in name(), v in term()) {
        // renaming a binder of t first must not change the result
        let s1 = t.subst(&[(x.clone(), v.clone())]);
        if let Term::Lam(y, body) = &t {
            if y != &x {
                let fresh = "w_fresh";
                let renamed = Term::Lam(fresh.into(), Box::new(body.subst(&[(y.clone(), Term::var(fresh))])));
                prop_assert!(alpha_eq(&renamed, &t, 0.0));
                let s2 = renamed.subst(&[(x.clone(), v)]);
                prop_assert!(alpha_eq(&s1, &s2, 0.0), "{}\n{}", pretty(&s1), pretty(&s2));
            }
        }
        prop_assert!(!binds(&s1, "w_fresh"));
    }

    #[test]
    fn types_round_trip(ty in stype()) {
        let back = qetlab_core::source::parse_type(&ty.to_string()).unwrap();
        prop_assert_eq!(back, ty);
    }
}

#[test]
fn corpus_programs_round_trip() {
    let mut seen = 0;
    for e in corpus() {
        let p = parse_program(e.source).unwrap();
        let text = p.pretty();
        let q = parse_program(&text).unwrap_or_else(|err| panic!("{}: {err}\n{text}", e.name));
        assert!(alpha_eq(p.term.as_ref().unwrap(), q.term.as_ref().unwrap(), 1e-9), "{}", e.name);
        assert_eq!(p.inputs.len(), q.inputs.len());
        for (a, b) in p.inputs.iter().zip(&q.inputs) {
            assert_eq!(a.ty, b.ty);
            match (&a.value, &b.value) {
                (Some(x), Some(y)) => assert!(alpha_eq(x, y, 1e-9)),
                (None, None) => {}
                _ => panic!("{}: input {} lost its value", e.name, a.name),
            }
        }
        seen += 1;
    }
    assert!(seen >= 10);
    assert!(FILES.iter().any(|(n, _)| n.ends_with(".aql")));
}
