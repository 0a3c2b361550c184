//! Dense state-vector kernel.
//!
//! States are amplitude vectors over `n` qubits. Qubit 0 (the "first" qubit)
//! is the most significant bit of the basis index, so `|100>` has index 4.
//! Gates and measurements act on the leading qubits only; other positions
//! are reached by inserting SWAP gates.

use std::fmt;

use num_complex::Complex;
use num_traits::{Float, FromPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Floating-point scalar usable as an amplitude component.
pub trait Scalar: Float + FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static {
    /// Tolerance for the unit-norm and unitarity invariants.
    fn norm_tol() -> Self;
    /// Below this a measurement outcome counts as impossible.
    fn zero_prob_tol() -> Self;
}

impl Scalar for f64 {
    fn norm_tol() -> Self {
        1e-9
    }
    fn zero_prob_tol() -> Self {
        1e-12
    }
}

impl Scalar for f32 {
    fn norm_tol() -> Self {
        1e-5
    }
    fn zero_prob_tol() -> Self {
        1e-7
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("amplitude vector has length {0}, which is not a positive power of two")]
    BadLength(usize),
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("non-finite amplitude")]
    NonFinite,
    #[error("matrix of size {rows}x{cols} is not a 2^n square matrix")]
    BadMatrixShape { rows: usize, cols: usize },
    #[error("matrix is not unitary (max deviation {0})")]
    NotUnitary(f64),
    #[error("basis label `{0}` is not a non-empty bit string")]
    BadBasisLabel(String),
}

fn log2_exact(len: usize) -> Option<usize> {
    (len >= 2 && len.is_power_of_two()).then(|| len.trailing_zeros() as usize)
}

fn s<S: Scalar>(x: f64) -> S {
    S::from_f64(x).expect("scalar conversion")
}

/// Pure state of `n_qubits >= 1` qubits with unit norm.
#[derive(Clone, PartialEq)]
pub struct QState<S: Scalar> {
    n_qubits: usize,
    amps: Vec<Complex<S>>,
}

impl<S: Scalar> QState<S> {
    /// Builds a state, checking length, finiteness and norm.
    pub fn new(amps: Vec<Complex<S>>) -> Result<Self, LinalgError> {
        let n_qubits = log2_exact(amps.len()).ok_or(LinalgError::BadLength(amps.len()))?;
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let st = QState { n_qubits, amps };
        let norm = st.norm();
        if (norm - S::one()).abs() > S::norm_tol() {
            return Err(LinalgError::NotNormalized(norm.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(st)
    }

    /// Builds a state from an unnormalized vector, rescaling it to unit norm
    /// when its norm lies within `tol` of one.
    pub fn renormalized(amps: Vec<Complex<S>>, tol: S) -> Result<Self, LinalgError> {
        let n_qubits = log2_exact(amps.len()).ok_or(LinalgError::BadLength(amps.len()))?;
        if amps.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let norm = amps.iter().map(|a| a.norm_sqr()).fold(S::zero(), |x, y| x + y).sqrt();
        if (norm - S::one()).abs() > tol {
            return Err(LinalgError::NotNormalized(norm.to_f64().unwrap_or(f64::NAN)));
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        Ok(QState { n_qubits, amps })
    }

    /// Computational basis state, e.g. `basis("010")`.
    pub fn basis(bits: &str) -> Result<Self, LinalgError> {
        if bits.is_empty() || !bits.chars().all(|c| c == '0' || c == '1') {
            return Err(LinalgError::BadBasisLabel(bits.to_string()));
        }
        let n = bits.len();
        let idx = usize::from_str_radix(bits, 2).expect("validated bit string");
        let mut amps = vec![Complex::new(S::zero(), S::zero()); 1 << n];
        amps[idx] = Complex::new(S::one(), S::zero());
        Ok(QState { n_qubits: n, amps })
    }

    /// Haar-distributed random state: a normalized complex Gaussian vector.
    pub fn random<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Self {
        assert!(n_qubits >= 1, "states have at least one qubit");
        loop {
            let amps: Vec<Complex<S>> = (0..1usize << n_qubits)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(rng);
                    let im: f64 = StandardNormal.sample(rng);
                    Complex::new(s(re), s(im))
                })
                .collect();
            if let Ok(st) = QState::renormalized(amps, S::infinity()) {
                return st;
            }
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex<S>] {
        &self.amps
    }

    pub fn norm(&self) -> S {
        self.amps.iter().map(|a| a.norm_sqr()).fold(S::zero(), |x, y| x + y).sqrt()
    }

    /// Amplitude-wise comparison; states of different width are never close.
    pub fn approx_eq(&self, other: &Self, tol: S) -> bool {
        self.n_qubits == other.n_qubits
            && self.amps.iter().zip(&other.amps).all(|(a, b)| (a - b).norm() <= tol)
    }

    /// Probability that the basis state `bits` is observed when measuring all qubits.
    pub fn basis_prob(&self, index: usize) -> S {
        self.amps.get(index).map(|a| a.norm_sqr()).unwrap_or_else(S::zero)
    }
}

impl<S: Scalar> fmt::Debug for QState<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QState[")?;
        let mut first = true;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm() == S::zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}{:+}i)|{:0w$b}>", a.re, a.im, i, w = self.n_qubits)?;
        }
        write!(f, "]")
    }
}

/// Kronecker product `a ⊗ b`.
pub fn tensor<S: Scalar>(a: &QState<S>, b: &QState<S>) -> QState<S> {
    let mut amps = Vec::with_capacity(a.amps.len() * b.amps.len());
    for x in &a.amps {
        for y in &b.amps {
            amps.push(x * y);
        }
    }
    QState { n_qubits: a.n_qubits + b.n_qubits, amps }
}

/// Square unitary matrix on `n_qubits` qubits, stored row-major.
#[derive(Clone, PartialEq)]
pub struct Unitary<S: Scalar> {
    n_qubits: usize,
    dim: usize,
    entries: Vec<Complex<S>>,
}

impl<S: Scalar> fmt::Debug for Unitary<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Unitary({} qubits)", self.n_qubits)
    }
}

impl<S: Scalar> Unitary<S> {
    /// Validates shape and `U U† = I` entrywise within `S::norm_tol()`.
    pub fn new(rows: Vec<Vec<Complex<S>>>) -> Result<Self, LinalgError> {
        let dim = rows.len();
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        let n_qubits = log2_exact(dim).ok_or(LinalgError::BadMatrixShape { rows: dim, cols })?;
        if rows.iter().any(|r| r.len() != dim) {
            return Err(LinalgError::BadMatrixShape { rows: dim, cols });
        }
        let entries: Vec<Complex<S>> = rows.into_iter().flatten().collect();
        if entries.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(LinalgError::NonFinite);
        }
        let u = Unitary { n_qubits, dim, entries };
        let dev = u.unitarity_deviation();
        if dev > S::norm_tol() {
            return Err(LinalgError::NotUnitary(dev.to_f64().unwrap_or(f64::NAN)));
        }
        Ok(u)
    }

    fn from_real_rows(rows: &[&[f64]]) -> Self {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|&x| Complex::new(s(x), S::zero())).collect())
            .collect();
        Unitary::new(rows).expect("built-in gate is unitary")
    }

    /// Largest entrywise deviation of `U U†` from the identity.
    pub fn unitarity_deviation(&self) -> S {
        let mut worst = S::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut acc = Complex::new(S::zero(), S::zero());
                for k in 0..self.dim {
                    acc = acc + self.at(i, k) * self.at(j, k).conj();
                }
                let target = if i == j { S::one() } else { S::zero() };
                worst = worst.max((acc - Complex::new(target, S::zero())).norm());
            }
        }
        worst
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn at(&self, row: usize, col: usize) -> Complex<S> {
        self.entries[row * self.dim + col]
    }

    pub fn rows(&self) -> Vec<Vec<Complex<S>>> {
        self.entries.chunks(self.dim).map(<[_]>::to_vec).collect()
    }

    pub fn hadamard() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_real_rows(&[&[h, h], &[h, -h]])
    }

    pub fn pauli_x() -> Self {
        Self::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
    }

    pub fn pauli_y() -> Self {
        let z = Complex::new(S::zero(), S::zero());
        let i = Complex::new(S::zero(), S::one());
        Unitary::new(vec![vec![z, -i], vec![i, z]]).expect("Y is unitary")
    }

    pub fn pauli_z() -> Self {
        Self::from_real_rows(&[&[1.0, 0.0], &[0.0, -1.0]])
    }

    pub fn phase_s() -> Self {
        let z = Complex::new(S::zero(), S::zero());
        let one = Complex::new(S::one(), S::zero());
        let i = Complex::new(S::zero(), S::one());
        Unitary::new(vec![vec![one, z], vec![z, i]]).expect("S is unitary")
    }

    pub fn phase_t() -> Self {
        let z = Complex::new(S::zero(), S::zero());
        let one = Complex::new(S::one(), S::zero());
        let h: S = s(std::f64::consts::FRAC_1_SQRT_2);
        Unitary::new(vec![vec![one, z], vec![z, Complex::new(h, h)]]).expect("T is unitary")
    }

    /// Controlled NOT, control on the first qubit.
    pub fn cnot() -> Self {
        Self::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 0.0],
        ])
    }

    pub fn swap() -> Self {
        Self::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ])
    }

    /// Built-in gate table: H, X, Y, Z, S, T, CNOT, SWAP.
    pub fn builtin(name: &str) -> Option<Self> {
        Some(match name {
            "H" => Self::hadamard(),
            "X" => Self::pauli_x(),
            "Y" => Self::pauli_y(),
            "Z" => Self::pauli_z(),
            "S" => Self::phase_s(),
            "T" => Self::phase_t(),
            "CNOT" => Self::cnot(),
            "SWAP" => Self::swap(),
            _ => return None,
        })
    }

    pub const BUILTIN_NAMES: [&'static str; 8] = ["H", "X", "Y", "Z", "S", "T", "CNOT", "SWAP"];
}

/// Applies `U ⊗ I` to the leading qubits; identity when the state is
/// narrower than the gate.
pub fn apply_unitary<S: Scalar>(u: &Unitary<S>, st: &QState<S>) -> QState<S> {
    if st.n_qubits < u.n_qubits {
        return st.clone();
    }
    let rest = 1usize << (st.n_qubits - u.n_qubits);
    let zero = Complex::new(S::zero(), S::zero());
    let mut out = vec![zero; st.amps.len()];
    for hi in 0..u.dim {
        for lo in 0..rest {
            let mut acc = zero;
            for j in 0..u.dim {
                acc = acc + u.at(hi, j) * st.amps[j * rest + lo];
            }
            out[hi * rest + lo] = acc;
        }
    }
    QState { n_qubits: st.n_qubits, amps: out }
}

/// Probability of observing `bit` on the first qubit.
pub fn measure_prob<S: Scalar>(bit: u8, st: &QState<S>) -> S {
    let half = st.amps.len() / 2;
    let range = if bit == 0 { 0..half } else { half..st.amps.len() };
    st.amps[range].iter().map(|a| a.norm_sqr()).fold(S::zero(), |x, y| x + y)
}

/// Post-measurement state for outcome `bit` on the first qubit; the state
/// itself when that outcome has (numerically) zero probability.
pub fn post_measure<S: Scalar>(bit: u8, st: &QState<S>) -> QState<S> {
    let p = measure_prob(bit, st);
    if p <= S::zero_prob_tol() {
        return st.clone();
    }
    let scale = p.sqrt();
    let half = st.amps.len() / 2;
    let zero = Complex::new(S::zero(), S::zero());
    let amps = st
        .amps
        .iter()
        .enumerate()
        .map(|(i, a)| if (i >= half) == (bit == 1) { a / scale } else { zero })
        .collect();
    QState { n_qubits: st.n_qubits, amps }
}

/// Projection onto first-qubit outcome `bit`, without renormalization.
pub fn project<S: Scalar>(bit: u8, st: &QState<S>) -> Vec<Complex<S>> {
    let half = st.amps.len() / 2;
    let zero = Complex::new(S::zero(), S::zero());
    st.amps
        .iter()
        .enumerate()
        .map(|(i, a)| if (i >= half) == (bit == 1) { *a } else { zero })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type C = Complex<f64>;

    fn st(amps: &[(f64, f64)]) -> QState<f64> {
        QState::new(amps.iter().map(|&(r, i)| C::new(r, i)).collect()).unwrap()
    }

    fn real(amps: &[f64]) -> QState<f64> {
        st(&amps.iter().map(|&r| (r, 0.0)).collect::<Vec<_>>())
    }

    const R2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn tensor_basis_states() {
        let s = tensor(&QState::<f64>::basis("0").unwrap(), &QState::basis("1").unwrap());
        assert!(s.approx_eq(&QState::basis("01").unwrap(), 0.0));
    }

    #[test]
    fn tensor_pads_with_zeros() {
        let psi = real(&[0.6, 0.8]);
        let s = tensor(&psi, &QState::basis("0").unwrap());
        assert!(s.approx_eq(&real(&[0.6, 0.0, 0.8, 0.0]), 1e-15));
    }

    #[test]
    fn tensor_plus_plus() {
        let plus = real(&[R2, R2]);
        let s = tensor(&plus, &plus);
        // hand expansion: every entry is (1/√2)(1/√2)
        assert!(s.approx_eq(&real(&[0.5, 0.5, 0.5, 0.5]), 1e-15));
    }

    #[test]
    fn hadamard_on_zero() {
        let s = apply_unitary(&Unitary::hadamard(), &QState::<f64>::basis("0").unwrap());
        assert!(s.approx_eq(&real(&[R2, R2]), 1e-15));
    }

    #[test]
    fn hadamard_extends_to_first_qubit() {
        let s = apply_unitary(&Unitary::hadamard(), &QState::<f64>::basis("100").unwrap());
        let mut want = vec![0.0; 8];
        want[0] = R2;
        want[4] = -R2;
        assert!(s.approx_eq(&real(&want), 1e-15));
    }

    #[test]
    fn wide_gate_on_narrow_state_is_identity() {
        let one = QState::<f64>::basis("1").unwrap();
        assert_eq!(apply_unitary(&Unitary::cnot(), &one), one);
    }

    #[test]
    fn measurement_values() {
        let t = 1.0 / 3f64.sqrt();
        let psi = real(&[t, 0.0, t, t]);
        assert!((measure_prob(1, &psi) - 2.0 / 3.0).abs() < 1e-12);
        let m1 = post_measure(1, &psi);
        assert!(m1.approx_eq(&real(&[0.0, 0.0, R2, R2]), 1e-12));

        let mut amps = vec![0.0; 8];
        amps[1] = 0.5;
        amps[3] = R2;
        amps[4] = 0.5;
        let psi = real(&amps);
        assert!((measure_prob(0, &psi) - 0.75).abs() < 1e-12);
        assert!(post_measure(1, &psi).approx_eq(&QState::basis("100").unwrap(), 1e-12));
        assert_eq!(measure_prob(0, &QState::<f64>::basis("0").unwrap()), 1.0);
    }

    #[test]
    fn impossible_outcome_leaves_state() {
        let one = QState::<f64>::basis("1").unwrap();
        assert_eq!(measure_prob(0, &one), 0.0);
        assert_eq!(post_measure(0, &one), one);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(QState::<f64>::new(vec![C::new(1.0, 0.0); 3]), Err(LinalgError::BadLength(3))));
        assert!(matches!(QState::<f64>::new(vec![C::new(1.0, 0.0); 2]), Err(LinalgError::NotNormalized(_))));
        assert!(QState::<f64>::basis("").is_err());
        assert!(QState::<f64>::basis("012").is_err());
        let bad = vec![vec![C::new(1.0, 0.0), C::new(1.0, 0.0)], vec![C::new(0.0, 0.0), C::new(1.0, 0.0)]];
        assert!(matches!(Unitary::new(bad), Err(LinalgError::NotUnitary(_))));
    }

    #[test]
    fn builtins_are_unitary() {
        for name in Unitary::<f64>::BUILTIN_NAMES {
            let u = Unitary::<f64>::builtin(name).unwrap();
            assert!(u.unitarity_deviation() < 1e-12, "{name}");
        }
        assert!(Unitary::<f64>::builtin("Q").is_none());
    }

    #[test]
    fn single_precision_instantiation() {
        let s = apply_unitary(&Unitary::<f32>::hadamard(), &QState::<f32>::basis("0").unwrap());
        assert!((measure_prob(0, &s) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn random_state_is_normalized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..5 {
            let s: QState<f64> = QState::random(n, &mut rng);
            assert!((s.norm() - 1.0).abs() < 1e-12);
        }
    }
}
