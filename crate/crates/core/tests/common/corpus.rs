//! Closed instances of the bundled corpus programs.

use qetlab_core::corpus::{corpus, CorpusEntry, Expectation};
use qetlab_core::linalg::QState;
use qetlab_core::soundness::{close_program, Closed};
use qetlab_core::source::{parse_program, parse_term, Program, Term};
use rand::Rng;

pub struct Instance {
    pub label: String,
    pub prog: Program,
    pub sigma: Vec<(String, Term)>,
    pub closed: Closed,
}

pub fn accepted() -> Vec<CorpusEntry> {
    corpus().into_iter().filter(|e| matches!(e.expect, Expectation::Accept { .. })).collect()
}

/// Every golden case of every accepted entry.
pub fn golden_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    for e in accepted() {
        let Expectation::Accept { cases, .. } = e.expect else { unreachable!() };
        let prog = parse_program(e.source).unwrap();
        for (i, case) in cases.iter().enumerate() {
            let sigma: Vec<(String, Term)> =
                case.sigma.iter().map(|(x, v)| (x.to_string(), parse_term(&prog.decls, v).unwrap())).collect();
            let closed = close_program(&prog, &sigma).unwrap_or_else(|err| panic!("{}: {err}", e.name));
            out.push(Instance { label: format!("{}#{i}", e.name), prog: prog.clone(), sigma, closed });
        }
    }
    out
}

/// The default closing of each accepted entry with every ket input replaced
/// by a random state of the same width.
pub fn random_instances<R: Rng>(rng: &mut R) -> Vec<Instance> {
    let mut out = Vec::new();
    for e in accepted() {
        let prog = parse_program(e.source).unwrap();
        let sigma: Vec<(String, Term)> = prog
            .inputs
            .iter()
            .filter_map(|i| match &i.value {
                Some(Term::Ket(s)) => Some((i.name.clone(), Term::Ket(QState::random(s.n_qubits(), rng)))),
                _ => None,
            })
            .collect();
        let closed = close_program(&prog, &sigma).unwrap_or_else(|err| panic!("{}: {err}", e.name));
        out.push(Instance { label: format!("{}~random", e.name), prog: prog.clone(), sigma, closed });
    }
    out
}
