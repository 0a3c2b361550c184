//! Barycentric algebras with a bottom element, ordered as ω-cpos, and cost
//! structures on top of them.
//!
//! `a.bary(r, b)` is `a ⊕_r b`: weight `r` on the left operand.

use std::cmp::Ordering;
use std::fmt;

use num_traits::{FromPrimitive, Num, One, ToPrimitive, Zero};
use thiserror::Error;

/// Scalar type for weights and finite costs. Implemented by `f32`, `f64`
/// and exact rationals.
pub trait CostScalar: Clone + PartialOrd + Num + FromPrimitive + ToPrimitive + fmt::Debug {}

impl<T: Clone + PartialOrd + Num + FromPrimitive + ToPrimitive + fmt::Debug> CostScalar for T {}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("probability mass {0} exceeds 1")]
    ProbabilityMassExceeded(f64),
    #[error("weight {0} outside [0,1]")]
    BadWeight(f64),
    #[error("value {0} is not in the carrier of {1}")]
    OutOfCarrier(String, &'static str),
    #[error("chain is not increasing at iterate {0}")]
    ChainViolation(usize),
}

/// Non-negative reals extended with a top element.
#[derive(Clone, Debug, PartialEq)]
pub enum ExtReal<S> {
    Finite(S),
    Infinite,
}

impl<S: CostScalar> ExtReal<S> {
    pub fn zero() -> Self {
        ExtReal::Finite(S::zero())
    }

    pub fn one() -> Self {
        ExtReal::Finite(S::one())
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtReal::Infinite)
    }

    /// `r + ∞ = ∞`.
    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a.clone() + b.clone()),
            _ => ExtReal::Infinite,
        }
    }

    /// Scaling by a finite non-negative weight; `0 · ∞ = 0`.
    pub fn scale(&self, r: &S) -> Self {
        match self {
            ExtReal::Finite(a) => ExtReal::Finite(r.clone() * a.clone()),
            ExtReal::Infinite if r.is_zero() => ExtReal::zero(),
            ExtReal::Infinite => ExtReal::Infinite,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExtReal::Finite(a) => a.to_f64().unwrap_or(f64::NAN),
            ExtReal::Infinite => f64::INFINITY,
        }
    }

    /// Maps `+∞` to `Infinite`; negative or NaN inputs are rejected.
    pub fn from_f64(x: f64) -> Option<Self> {
        if x.is_nan() || x < 0.0 {
            None
        } else if x.is_infinite() {
            Some(ExtReal::Infinite)
        } else {
            S::from_f64(x).map(ExtReal::Finite)
        }
    }
}

impl<S: CostScalar> PartialOrd for ExtReal<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => a.partial_cmp(b),
            (ExtReal::Finite(_), ExtReal::Infinite) => Some(Ordering::Less),
            (ExtReal::Infinite, ExtReal::Finite(_)) => Some(Ordering::Greater),
            (ExtReal::Infinite, ExtReal::Infinite) => Some(Ordering::Equal),
        }
    }
}

impl<S: CostScalar + fmt::Display> fmt::Display for ExtReal<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(a) => write!(f, "{a}"),
            ExtReal::Infinite => write!(f, "inf"),
        }
    }
}

/// Pointed barycentric algebra with an ω-cpo order.
pub trait Kegelspitze {
    type Scalar: CostScalar;
    type Elem: Clone + fmt::Debug + PartialEq;

    fn name(&self) -> &'static str;
    fn bottom(&self) -> Self::Elem;
    /// `a ⊕_r b`.
    fn bary(&self, r: &Self::Scalar, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    /// The order `⊑`.
    fn leq(&self, a: &Self::Elem, b: &Self::Elem) -> bool;
    /// Numeric distance used for convergence tests; `inf` when one side is
    /// the top element and the other is not.
    fn distance(&self, a: &Self::Elem, b: &Self::Elem) -> f64;
    /// Embedding of extended reals, used for real-valued constants at cost type.
    fn from_real(&self, x: &ExtReal<Self::Scalar>) -> Result<Self::Elem, CostError>;
    fn to_real(&self, a: &Self::Elem) -> ExtReal<Self::Scalar>;

    /// `r · a = a ⊕_r ⊥`.
    fn scalar(&self, r: &Self::Scalar, a: &Self::Elem) -> Self::Elem {
        self.bary(r, a, &self.bottom())
    }
}

/// A Kegelspitze with an action `+̂ : ℝ^{+∞} × K → K`.
pub trait CostStructure: Kegelspitze {
    fn cadd(&self, c: &ExtReal<Self::Scalar>, a: &Self::Elem) -> Self::Elem;
}

fn real_bary<S: CostScalar>(r: &S, a: &ExtReal<S>, b: &ExtReal<S>) -> ExtReal<S> {
    let rest = S::one() - r.clone();
    a.scale(r).add(&b.scale(&rest))
}

fn real_distance<S: CostScalar>(a: &ExtReal<S>, b: &ExtReal<S>) -> f64 {
    match (a, b) {
        (ExtReal::Infinite, ExtReal::Infinite) => 0.0,
        (ExtReal::Finite(x), ExtReal::Finite(y)) => {
            (x.to_f64().unwrap_or(f64::NAN) - y.to_f64().unwrap_or(f64::NAN)).abs()
        }
        _ => f64::INFINITY,
    }
}

/// `(ℝ^{+∞}, ≤)` with additive `+̂`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RealsPlus<S>(std::marker::PhantomData<S>);

impl<S> RealsPlus<S> {
    pub fn new() -> Self {
        RealsPlus(std::marker::PhantomData)
    }
}

impl<S: CostScalar> Kegelspitze for RealsPlus<S> {
    type Scalar = S;
    type Elem = ExtReal<S>;

    fn name(&self) -> &'static str {
        "rplus"
    }
    fn bottom(&self) -> ExtReal<S> {
        ExtReal::zero()
    }
    fn bary(&self, r: &S, a: &ExtReal<S>, b: &ExtReal<S>) -> ExtReal<S> {
        real_bary(r, a, b)
    }
    fn leq(&self, a: &ExtReal<S>, b: &ExtReal<S>) -> bool {
        a <= b
    }
    fn distance(&self, a: &ExtReal<S>, b: &ExtReal<S>) -> f64 {
        real_distance(a, b)
    }
    fn from_real(&self, x: &ExtReal<S>) -> Result<ExtReal<S>, CostError> {
        Ok(x.clone())
    }
    fn to_real(&self, a: &ExtReal<S>) -> ExtReal<S> {
        a.clone()
    }
}

impl<S: CostScalar> CostStructure for RealsPlus<S> {
    fn cadd(&self, c: &ExtReal<S>, a: &ExtReal<S>) -> ExtReal<S> {
        c.add(a)
    }
}

/// `([0,1], ≤)` with the standard barycentric operation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UnitInterval<S>(std::marker::PhantomData<S>);

impl<S> UnitInterval<S> {
    pub fn new() -> Self {
        UnitInterval(std::marker::PhantomData)
    }
}

impl<S: CostScalar> Kegelspitze for UnitInterval<S> {
    type Scalar = S;
    type Elem = S;

    fn name(&self) -> &'static str {
        "unit"
    }
    fn bottom(&self) -> S {
        S::zero()
    }
    fn bary(&self, r: &S, a: &S, b: &S) -> S {
        r.clone() * a.clone() + (S::one() - r.clone()) * b.clone()
    }
    fn leq(&self, a: &S, b: &S) -> bool {
        a <= b
    }
    fn distance(&self, a: &S, b: &S) -> f64 {
        (a.to_f64().unwrap_or(f64::NAN) - b.to_f64().unwrap_or(f64::NAN)).abs()
    }
    fn from_real(&self, x: &ExtReal<S>) -> Result<S, CostError> {
        let slack = S::from_f64(1e-12).unwrap_or_else(S::zero);
        match x {
            ExtReal::Finite(v) if *v <= S::one() => Ok(v.clone()),
            ExtReal::Finite(v) if *v <= S::one() + slack => Ok(S::one()),
            _ => Err(CostError::OutOfCarrier(format!("{:?}", x), "unit")),
        }
    }
    fn to_real(&self, a: &S) -> ExtReal<S> {
        ExtReal::Finite(a.clone())
    }
}

/// Any Kegelspitze made into a cost structure by `c +̂ a = a`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Forgetful<K>(pub K);

impl<K: Kegelspitze> Kegelspitze for Forgetful<K> {
    type Scalar = K::Scalar;
    type Elem = K::Elem;

    fn name(&self) -> &'static str {
        self.0.name()
    }
    fn bottom(&self) -> K::Elem {
        self.0.bottom()
    }
    fn bary(&self, r: &K::Scalar, a: &K::Elem, b: &K::Elem) -> K::Elem {
        self.0.bary(r, a, b)
    }
    fn leq(&self, a: &K::Elem, b: &K::Elem) -> bool {
        self.0.leq(a, b)
    }
    fn distance(&self, a: &K::Elem, b: &K::Elem) -> f64 {
        self.0.distance(a, b)
    }
    fn from_real(&self, x: &ExtReal<K::Scalar>) -> Result<K::Elem, CostError> {
        self.0.from_real(x)
    }
    fn to_real(&self, a: &K::Elem) -> ExtReal<K::Scalar> {
        self.0.to_real(a)
    }
}

impl<K: Kegelspitze> CostStructure for Forgetful<K> {
    fn cadd(&self, _c: &ExtReal<K::Scalar>, a: &K::Elem) -> K::Elem {
        a.clone()
    }
}

pub fn instance_rplus() -> RealsPlus<f64> {
    RealsPlus::new()
}

pub fn instance_unit_forgetful() -> Forgetful<UnitInterval<f64>> {
    Forgetful(UnitInterval::new())
}

/// `Σ rᵢ aᵢ`, following the recursive definition from the last pair inwards.
///
/// The recursion is unrolled bottom-up: at level `k` the weights are
/// `rᵢ / (1 - Σ_{j>k} rⱼ)`.
pub fn convex_sum<K: Kegelspitze>(
    k: &K,
    pairs: &[(K::Scalar, K::Elem)],
) -> Result<K::Elem, CostError> {
    let zero = K::Scalar::zero();
    let one = K::Scalar::one();
    let mut total = zero.clone();
    for (r, _) in pairs {
        if *r < zero || *r > one {
            return Err(CostError::BadWeight(r.to_f64().unwrap_or(f64::NAN)));
        }
        total = total + r.clone();
    }
    let tol = K::Scalar::from_f64(1e-12).unwrap_or_else(|| zero.clone());
    if total > one.clone() + tol {
        return Err(CostError::ProbabilityMassExceeded(total.to_f64().unwrap_or(f64::NAN)));
    }
    // denominators D_k = 1 - Σ_{j>k} r_j, computed from the top
    let mut denoms = Vec::with_capacity(pairs.len());
    let mut above = zero.clone();
    for (r, _) in pairs.iter().rev() {
        denoms.push(one.clone() - above.clone());
        above = above + r.clone();
    }
    denoms.reverse();
    let mut acc = k.bottom();
    for ((r, a), d) in pairs.iter().zip(denoms) {
        if d <= zero || *r >= d {
            acc = a.clone();
            continue;
        }
        let w = r.clone() / d;
        acc = if w >= one { a.clone() } else { k.bary(&w, a, &acc) };
    }
    Ok(acc)
}

/// Outcome of approximating the least upper bound of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct LubResult<E> {
    pub value: E,
    /// Index of the returned iterate.
    pub iterations: usize,
    pub converged: bool,
    /// Set when the chain passed the divergence threshold; `value` is then ⊤.
    pub divergent: bool,
}

/// Iterates beyond this magnitude are taken as evidence of an infinite lub.
pub const DIVERGENCE_THRESHOLD: f64 = 1e15;

/// Walks the chain `gen(0) ⊑ gen(1) ⊑ …` until two successive iterates are
/// closer than `tol`, the iterates pass [`DIVERGENCE_THRESHOLD`], or
/// `max_iters` is reached (then flagged unconverged: an under-approximation).
pub fn kleene_lub<K, G>(k: &K, mut gen: G, tol: f64, max_iters: usize) -> Result<LubResult<K::Elem>, CostError>
where
    K: Kegelspitze,
    G: FnMut(usize) -> K::Elem,
{
    let mut prev = gen(0);
    for i in 1..=max_iters {
        let next = gen(i);
        let d = k.distance(&prev, &next);
        if !k.leq(&prev, &next) && d > 1e-12 * (1.0 + k.to_real(&prev).to_f64().abs()) {
            return Err(CostError::ChainViolation(i));
        }
        if k.to_real(&next).to_f64() > DIVERGENCE_THRESHOLD {
            let top = k.from_real(&ExtReal::Infinite).unwrap_or(next);
            return Ok(LubResult { value: top, iterations: i, converged: false, divergent: true });
        }
        if d < tol {
            return Ok(LubResult { value: next, iterations: i, converged: true, divergent: false });
        }
        prev = next;
    }
    Ok(LubResult { value: prev, iterations: max_iters, converged: false, divergent: false })
}
