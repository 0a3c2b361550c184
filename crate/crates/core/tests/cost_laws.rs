mod common;

use common::laws::{check_draw, Draw, Tolerance};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use qetlab_core::cost::{ExtReal, Forgetful, RealsPlus, UnitInterval};

const CASES: u32 = 10_000;
const TOL: Tolerance = Tolerance(Some(1e-12));

fn weight() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 1 => Just(1.0), 1 => Just(0.5), 7 => 0.0..=1.0f64]
}

fn ext_real() -> impl Strategy<Value = ExtReal<f64>> {
    prop_oneof![
        1 => Just(ExtReal::Infinite),
        1 => Just(ExtReal::zero()),
        8 => (0.0..1.0f64, -3i32..6).prop_map(|(m, e)| ExtReal::Finite(m * 10f64.powi(e))),
    ]
}

fn unit() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 1 => Just(1.0), 8 => 0.0..=1.0f64]
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn q_weight() -> impl Strategy<Value = BigRational> {
    (1i64..1000).prop_flat_map(|d| (0..=d).prop_map(move |n| rat(n, d)))
}

fn q_ext_real() -> impl Strategy<Value = ExtReal<BigRational>> {
    prop_oneof![
        1 => Just(ExtReal::Infinite),
        9 => (0i64..1_000_000, 1i64..10_000).prop_map(|(n, d)| ExtReal::Finite(rat(n, d))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn rplus_f64(a in ext_real(), b in ext_real(), c in ext_real(), x in ext_real(), y in ext_real(), r in weight(), s in weight()) {
        let d = Draw { a, b, c, x, y, r, s };
        let res = check_draw(&RealsPlus::<f64>::new(), &d, TOL);
        prop_assert!(res.is_ok(), "{}", res.unwrap_err());
    }

    #[test]
    fn unit_forgetful_f64(a in unit(), b in unit(), c in unit(), x in ext_real(), y in ext_real(), r in weight(), s in weight()) {
        let k = Forgetful(UnitInterval::<f64>::new());
        let d = Draw { a, b, c, x, y, r, s };
        let res = check_draw(&k, &d, TOL);
        prop_assert!(res.is_ok(), "{}", res.unwrap_err());
        let v = qetlab_core::cost::Kegelspitze::bary(&k, &d.r, &d.a, &d.b);
        prop_assert!((-1e-15..=1.0 + 1e-15).contains(&v));
    }

    #[test]
    fn rplus_exact(a in q_ext_real(), b in q_ext_real(), c in q_ext_real(), x in q_ext_real(), y in q_ext_real(), r in q_weight(), s in q_weight()) {
        let d = Draw { a, b, c, x, y, r, s };
        let res = check_draw(&RealsPlus::<BigRational>::new(), &d, Tolerance::EXACT);
        prop_assert!(res.is_ok(), "{}", res.unwrap_err());
    }

    #[test]
    fn unit_forgetful_exact(a in q_weight(), b in q_weight(), c in q_weight(), x in q_ext_real(), y in q_ext_real(), r in q_weight(), s in q_weight()) {
        let d = Draw { a, b, c, x, y, r, s };
        let res = check_draw(&Forgetful(UnitInterval::<BigRational>::new()), &d, Tolerance::EXACT);
        prop_assert!(res.is_ok(), "{}", res.unwrap_err());
    }
}
