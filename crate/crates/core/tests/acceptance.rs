//! Acceptance run. Prints one line per criterion; run with `--nocapture` to
//! see them.

mod common;

use std::time::{Duration, Instant};

use common::laws::{check_draw, Draw, Tolerance};
use qetlab_core::corpus::{corpus, corpus_file, grover_error, verify_entry};
use qetlab_core::cost::{instance_rplus, ExtReal, Forgetful, RealsPlus, UnitInterval};
use qetlab_core::cs::{denote_closed_cost, parse_cs_term, CsTerm, Den, Env};
use qetlab_core::decls::Decls;
use qetlab_core::linalg::{measure_prob, post_measure};
use qetlab_core::refinement::{check_refined, parse_formula, parse_rty, validity, Defs, OracleConfig, RtyFile, Verdict};
use qetlab_core::soundness::{check_expected_cost, check_expected_value, HarnessConfig};
use qetlab_core::source::{parse_program, parse_term, Program, Term};
use qetlab_core::typecheck::{check_program, TypeErrorKind};
use qetlab_core::{Complex, QState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MEAS_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-6;
const LAW_TOL: Tolerance = Tolerance(Some(1e-12));
const LAW_DRAWS: usize = 10_000;
const LAW_TIME: Duration = Duration::from_secs(5);
const ORACLE_MIN: usize = 1000;

type Outcome = Result<String, String>;

fn program(file: &str) -> Program {
    parse_program(corpus_file(file).unwrap()).unwrap()
}

fn ket(psi: QState) -> Vec<(String, Term)> {
    vec![("y".into(), Term::Ket(psi))]
}

fn ecost_term() -> CsTerm {
    parse_cs_term(&Decls::new(), corpus_file("ecost.csl").unwrap()).unwrap()
}

fn ecost_at(psi: &QState) -> Result<f64, String> {
    let env = Env::empty().bind("X", Den::Quantum(psi.clone()));
    let r = denote_closed_cost(&instance_rplus(), &Decls::new(), &CsTerm::app(ecost_term(), CsTerm::var("X")), &env, 64, 1e-12).map_err(|e| e.to_string())?;
    Ok(r.value.to_f64())
}

fn c1_measurement() -> Outcome {
    let s = 1.0 / 3f64.sqrt();
    let z = Complex::new(0.0, 0.0);
    let a = Complex::new(s, 0.0);
    let psi = QState::new(vec![a, z, a, a]).map_err(|e| e.to_string())?;
    let p1 = measure_prob(1, &psi);
    let h = Complex::new(1.0 / 2f64.sqrt(), 0.0);
    let want = QState::new(vec![z, z, h, h]).map_err(|e| e.to_string())?;
    let post = post_measure(1, &psi);
    if (p1 - 2.0 / 3.0).abs() > MEAS_TOL {
        return Err(format!("p1 = {p1}, want 2/3"));
    }
    if !post.approx_eq(&want, MEAS_TOL) {
        return Err(format!("post-measurement state {:?}", post.amplitudes()));
    }
    Ok(format!("p1 = {p1:.12}, post-measurement state matches"))
}

fn c2_cointoss() -> Outcome {
    let r = check_expected_cost("cointoss", &program("cointoss.aql"), &[], HarnessConfig::default()).map_err(|e| e.to_string())?;
    let ok = r.pass && (r.operational - 1.5).abs() <= COST_TOL && (r.denotational - 1.5).abs() <= COST_TOL;
    let msg = format!("operational {:.9} (depth {}), denotational {:.9} (budget {})", r.operational, r.depth, r.denotational, r.budget);
    if ok { Ok(msg) } else { Err(msg) }
}

fn c3_random_states() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let prog = program("cointoss.aql");
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let psi = QState::random(3, &mut rng);
        let want = 1.0 + 2.0 * measure_prob(1, &psi);
        let src = check_expected_cost("cointoss", &prog, &ket(psi.clone()), HarnessConfig::default()).map_err(|e| e.to_string())?;
        let cs = ecost_at(&psi)?;
        for got in [src.denotational, cs] {
            worst = worst.max((got - want).abs());
            if (got - want).abs() >= COST_TOL {
                return Err(format!("state {i}: {got} vs 1+2p1 = {want}"));
            }
        }
    }
    Ok(format!("100 states, worst gap {worst:.2e}"))
}

fn c4_corpus() -> Outcome {
    let cfg = HarnessConfig { tol: COST_TOL, ..HarnessConfig::default() };
    let entries = corpus();
    let failed: Vec<_> = entries.iter().map(|e| verify_entry(e, cfg)).filter(|o| !o.pass).map(|o| o.name).collect();
    if failed.is_empty() { Ok(format!("{} entries verified", entries.len())) } else { Err(format!("failed: {failed:?}")) }
}

fn c5_grover() -> Outcome {
    let prog = program("grover2.aql");
    let k = parse_cs_term(&prog.decls, corpus_file("grover2_err.csl").unwrap()).map_err(|e| e.to_string())?;
    let mut got = Vec::new();
    for (i, m) in ["0", "s(0;)", "s(s(0;);)"].into_iter().enumerate() {
        let i = i as u32;
        let n = parse_term(&prog.decls, m).map_err(|e| e.to_string())?;
        let sigma = vec![("m".to_string(), n)];
        let r = check_expected_value("grover2", &prog, &sigma, &k, HarnessConfig::default()).map_err(|e| e.to_string())?;
        let want = grover_error(2, i);
        if !r.pass || (r.denotational - want).abs() > COST_TOL || (r.operational - want).abs() > COST_TOL {
            return Err(format!("i = {i}: operational {} denotational {} want {want}", r.operational, r.denotational));
        }
        got.push(format!("{:.6}", r.denotational));
    }
    Ok(format!("error probabilities {}", got.join(", ")))
}

fn law_run<K, G>(k: &K, mut draw: G) -> Result<usize, String>
where
    K: qetlab_core::cost::CostStructure,
    G: FnMut() -> Draw<K::Elem, K::Scalar>,
{
    let mut n = 0;
    for _ in 0..LAW_DRAWS {
        n += check_draw(k, &draw(), LAW_TOL)?;
    }
    Ok(n)
}

fn c6_laws() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let weight = |rng: &mut ChaCha8Rng| match rng.gen_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.gen::<f64>(),
    };
    let cost = |rng: &mut ChaCha8Rng| match rng.gen_range(0..10) {
        0 => ExtReal::Infinite,
        1 => ExtReal::zero(),
        _ => ExtReal::Finite(rng.gen::<f64>() * 10f64.powi(rng.gen_range(-3..6))),
    };
    let mut r2 = rng.clone();
    let a = law_run(&RealsPlus::<f64>::new(), || Draw {
        a: cost(&mut rng),
        b: cost(&mut rng),
        c: cost(&mut rng),
        x: cost(&mut rng),
        y: cost(&mut rng),
        r: weight(&mut rng),
        s: weight(&mut rng),
    })?;
    let b = law_run(&Forgetful(UnitInterval::<f64>::new()), || Draw {
        a: weight(&mut r2),
        b: weight(&mut r2),
        c: weight(&mut r2),
        x: cost(&mut r2),
        y: cost(&mut r2),
        r: weight(&mut r2),
        s: weight(&mut r2),
    })?;
    let took = start.elapsed();
    let msg = format!("{LAW_DRAWS} draws per instance, {} law instances in {took:.2?}", a + b);
    if took < LAW_TIME { Ok(msg) } else { Err(msg) }
}

fn c7_typing() -> Outcome {
    match check_program(&program("clone.aql"), None) {
        Err(e) if e.iter().any(|e| e.kind == TypeErrorKind::LinearityViolation) => {}
        other => return Err(format!("clone: {other:?}")),
    }
    for f in ["cointoss.aql", "qwalk_h.aql", "grover1.aql", "grover2.aql", "grover3.aql"] {
        let ty = check_program(&program(f), None).map_err(|e| format!("{f}: {e:?}"))?;
        if ty.to_string() != "Q" {
            return Err(format!("{f}: {ty}"));
        }
    }
    Ok("clone rejected (linearity), cointoss/qwalk/grover accepted at Q".into())
}

fn rty(file: &str) -> (Defs, RtyFile) {
    let f = parse_rty(&Decls::new(), corpus_file(file).unwrap()).unwrap();
    let mut defs = Defs::new(f.decls.clone(), f.structure);
    defs.candidates = f.candidates.clone();
    (defs, f)
}

fn c8_refinement() -> Outcome {
    let cfg = OracleConfig::default();
    let step = "forall X : Q. 1 +^ bary(0, X, c(H(collapse1(X)))) <= c(X)";
    let (defs, f) = rty("ecost.rty");
    let phi = parse_formula(&defs.decls, step).map_err(|e| e.to_string())?;
    let dagger = validity(&defs, &f.context, &phi, &cfg);
    let full = check_refined(&defs, &f.context, &ecost_term(), &f.ty, &cfg).map_err(|e| e.to_string())?.verdict;
    for (what, v) in [("recursive step", &dagger), ("ECOST", &full)] {
        match v {
            Verdict::NotFalsified(n) if *n >= ORACLE_MIN => {}
            v => return Err(format!("{what}: {v}")),
        }
    }
    let (weak_defs, wf) = rty("ecost_weak.rty");
    let weak = check_refined(&weak_defs, &wf.context, &ecost_term(), &wf.ty, &cfg).map_err(|e| e.to_string())?.verdict;
    let weak_phi = parse_formula(&weak_defs.decls, step).map_err(|e| e.to_string())?;
    let weak_step = validity(&weak_defs, &wf.context, &weak_phi, &cfg);
    for (what, v) in [("weak ECOST", &weak), ("weak step", &weak_step)] {
        match v {
            Verdict::Falsified(w) if w.replay(&weak_defs) => {}
            v => return Err(format!("{what}: {v} (expected a replayable refutation)")),
        }
    }
    Ok(format!("step {dagger}, ECOST {full}, weak variant Falsified and replayed"))
}

fn c9_pars() -> Outcome {
    let mut n = 0;
    for inst in common::corpus::golden_instances() {
        let c = &inst.closed;
        let ty = qetlab_core::source::parse_type(&c.ty).map_err(|e| e.to_string())?;
        common::pars::nf_monotone(&c.decls, &c.closed, 40).map_err(|e| format!("{}: {e}", inst.label))?;
        common::pars::lifted_steps(&c.decls, &c.closed, &ty, 40, true).map_err(|e| format!("{}: {e}", inst.label))?;
        common::pars::deterministic(&c.decls, &c.closed, 40).map_err(|e| format!("{}: {e}", inst.label))?;
        n += 1;
    }
    Ok(format!("{n} closed corpus instances"))
}

fn c10_qwalk() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (walk, toss) = (program("qwalk_h.aql"), program("cointoss.aql"));
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let sigma = ket(QState::random(3, &mut rng));
        let a = check_expected_cost("qwalk_h", &walk, &sigma, HarnessConfig::default()).map_err(|e| e.to_string())?;
        let b = check_expected_cost("cointoss", &toss, &sigma, HarnessConfig::default()).map_err(|e| e.to_string())?;
        let gap = (a.denotational - b.denotational).abs();
        worst = worst.max(gap);
        if gap > COST_TOL {
            return Err(format!("state {i}: qwalk {} vs cointoss {}", a.denotational, b.denotational));
        }
    }
    Ok(format!("50 states, worst gap {worst:.2e}"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("measurement probabilities and collapse (tol 1e-9)", c1_measurement),
        ("cointoss expected cost 1.5 (tol 1e-6)", c2_cointoss),
        ("expected cost 1 + 2 p1 on 100 random states (tol 1e-6)", c3_random_states),
        ("corpus golden values (tol 1e-6)", c4_corpus),
        ("grover n=2 error probabilities (tol 1e-6)", c5_grover),
        ("cost structure laws (rel tol 1e-12, under 5s)", c6_laws),
        ("typing of corpus programs", c7_typing),
        ("refinement oracle (>= 1000 samples)", c8_refinement),
        ("rewrite system invariants on corpus", c9_pars),
        ("qwalk and cointoss agree on 50 states (tol 1e-6)", c10_qwalk),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(msg) => println!("PASS {:>2} {name}: {msg}", i + 1),
            Err(msg) => {
                println!("FAIL {:>2} {name}: {msg}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
