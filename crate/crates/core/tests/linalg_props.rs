use num_complex::Complex;
use proptest::prelude::*;
use qetlab_core::linalg::{apply_unitary, measure_prob, post_measure, project, tensor, QState, Unitary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

type C = Complex<f64>;

fn state(n: usize, seed: u64) -> QState<f64> {
    QState::random(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Gram-Schmidt on the columns of a complex Gaussian matrix.
fn random_unitary(n: usize, seed: u64) -> Unitary<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = 1 << n;
    let mut cols: Vec<Vec<C>> = Vec::with_capacity(dim);
    while cols.len() < dim {
        let mut v: Vec<C> = (0..dim)
            .map(|_| C::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        for _ in 0..2 {
            for q in &cols {
                let dot: C = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (x, y) in v.iter_mut().zip(q) {
                    *x -= dot * y;
                }
            }
        }
        let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    let rows = (0..dim).map(|i| (0..dim).map(|j| cols[j][i]).collect()).collect();
    Unitary::new(rows).expect("orthonormal columns")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn outcome_probabilities_sum_to_one(n in 1usize..=5, seed in any::<u64>()) {
        let s = state(n, seed);
        prop_assert!((measure_prob(0, &s) + measure_prob(1, &s) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn post_measurement_is_normalized(n in 1usize..=5, seed in any::<u64>(), bit in 0u8..=1) {
        let s = state(n, seed);
        if measure_prob(bit, &s) > 1e-12 {
            prop_assert!((post_measure(bit, &s).norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn builtin_gates_preserve_norm(n in 2usize..=4, seed in any::<u64>(), g in 0usize..8) {
        let u = Unitary::<f64>::builtin(Unitary::<f64>::BUILTIN_NAMES[g]).unwrap();
        let out = apply_unitary(&u, &state(n, seed));
        prop_assert!((out.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn random_unitaries_preserve_norm(k in 1usize..=3, extra in 0usize..=2, seed in any::<u64>()) {
        let u = random_unitary(k, seed);
        prop_assert!(u.unitarity_deviation() < 1e-9);
        let out = apply_unitary(&u, &state(k + extra, seed ^ 0x9e37));
        prop_assert!((out.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tensor_is_associative(a in 1usize..=2, b in 1usize..=2, c in 1usize..=2, seed in any::<u64>()) {
        let (x, y, z) = (state(a, seed), state(b, seed.wrapping_add(1)), state(c, seed.wrapping_add(2)));
        let left = tensor(&tensor(&x, &y), &z);
        let right = tensor(&x, &tensor(&y, &z));
        prop_assert!(left.approx_eq(&right, 1e-12));
    }

    #[test]
    fn projections_reconstruct_the_state(n in 1usize..=5, seed in any::<u64>()) {
        let s = state(n, seed);
        let (p0, p1) = (project(0, &s), project(1, &s));
        for (i, a) in s.amplitudes().iter().enumerate() {
            prop_assert!((p0[i] + p1[i] - a).norm() < 1e-12);
        }
        for bit in 0..=1u8 {
            let p = measure_prob(bit, &s);
            let proj = if bit == 0 { &p0 } else { &p1 };
            let mass: f64 = proj.iter().map(|a| a.norm_sqr()).sum();
            prop_assert!((mass - p).abs() < 1e-12);
            if p > 1e-12 {
                let post = post_measure(bit, &s);
                for (a, b) in post.amplitudes().iter().zip(proj) {
                    prop_assert!((a * p.sqrt() - b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn single_precision_kernel(n in 1usize..=4, seed in any::<u64>()) {
        let s: QState<f32> = QState::random(n, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert!((measure_prob(0, &s) + measure_prob(1, &s) - 1.0).abs() < 1e-5);
        let h = Unitary::<f32>::hadamard();
        prop_assert!((apply_unitary(&h, &s).norm() - 1.0).abs() < 1e-5);
    }
}
