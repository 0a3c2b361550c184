//! Barycentric-algebra and cost-structure laws, checked on concrete elements.

use qetlab_core::cost::{CostStructure, ExtReal, Kegelspitze, RealsPlus};

/// `None` compares elements with `==`; `Some(tol)` compares reals up to a
/// relative tolerance and infinities exactly.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance(pub Option<f64>);

impl Tolerance {
    pub const EXACT: Tolerance = Tolerance(None);

    pub fn close<K: Kegelspitze>(self, k: &K, x: &K::Elem, y: &K::Elem) -> bool {
        let Some(tol) = self.0 else { return x == y };
        match (k.to_real(x), k.to_real(y)) {
            (ExtReal::Infinite, ExtReal::Infinite) => true,
            (ExtReal::Finite(_), ExtReal::Finite(_)) => {
                let mag = k.to_real(x).to_f64().abs().max(k.to_real(y).to_f64().abs()).max(1.0);
                k.distance(x, y) <= tol * mag
            }
            _ => false,
        }
    }
}

/// One draw: three elements, two costs, two weights.
#[derive(Clone, Debug)]
pub struct Draw<E, S> {
    pub a: E,
    pub b: E,
    pub c: E,
    pub x: ExtReal<S>,
    pub y: ExtReal<S>,
    pub r: S,
    pub s: S,
}

/// Checks every law on one draw; returns the number of law instances
/// evaluated, or the name and operands of the first failure.
pub fn check_draw<K>(k: &K, d: &Draw<K::Elem, K::Scalar>, tol: Tolerance) -> Result<usize, String>
where
    K: CostStructure,
{
    let one = <K::Scalar as num_traits::One>::one();
    let zero = <K::Scalar as num_traits::Zero>::zero();
    let rp = RealsPlus::<K::Scalar>::new();
    let mut n = 0;
    let mut law = |name: &str, lhs: K::Elem, rhs: K::Elem| -> Result<(), String> {
        n += 1;
        if tol.close(k, &lhs, &rhs) {
            Ok(())
        } else {
            Err(format!("{name}: {lhs:?} vs {rhs:?} on {d:?}"))
        }
    };
    let Draw { a, b, c, x, y, r, s } = d;

    law("unit weight", k.bary(&one, a, b), a.clone())?;
    let r_bar = one.clone() - r.clone();
    law("skew commutativity", k.bary(r, a, b), k.bary(&r_bar, b, a))?;
    law("idempotence", k.bary(r, a, a), a.clone())?;
    let rs = r.clone() * s.clone();
    if rs != one {
        let w = (s.clone() - rs.clone()) / (one.clone() - rs.clone());
        let w = if w > one { one.clone() } else { w };
        let lhs = k.bary(s, &k.bary(r, a, b), c);
        let rhs = k.bary(&rs, a, &k.bary(&w, b, c));
        law("skew associativity", lhs, rhs)?;
    }
    law("scalar zero", k.scalar(&zero, a), k.bottom())?;
    law("scalar one", k.scalar(&one, a), a.clone())?;

    law("zero action", k.cadd(&ExtReal::zero(), a), a.clone())?;
    law("action associativity", k.cadd(x, &k.cadd(y, b)), k.cadd(&x.add(y), b))?;
    let lhs = k.bary(r, &k.cadd(x, a), &k.cadd(y, b));
    let rhs = k.cadd(&rp.bary(r, x, y), &k.bary(r, a, b));
    law("action distributes over bary", lhs, rhs)?;

    let mut order = |name: &str, lo: &K::Elem, hi: &K::Elem| -> Result<(), String> {
        n += 1;
        if k.leq(lo, hi) || tol.close(k, lo, hi) {
            Ok(())
        } else {
            Err(format!("{name}: {lo:?} not below {hi:?} on {d:?}"))
        }
    };
    order("bottom least", &k.bottom(), a)?;
    let (lo, hi) = if k.leq(a, b) { (a, b) } else { (b, a) };
    order("bary monotone left", &k.bary(r, lo, c), &k.bary(r, hi, c))?;
    order("bary monotone right", &k.bary(r, c, lo), &k.bary(r, c, hi))?;
    order("action monotone in element", &k.cadd(x, lo), &k.cadd(x, hi))?;
    let (xlo, xhi) = if x <= y { (x, y) } else { (y, x) };
    order("action monotone in cost", &k.cadd(xlo, c), &k.cadd(xhi, c))?;
    Ok(n)
}
