//! Checks on the probabilistic rewrite system shared by the property suite
//! and the acceptance run.

use qetlab_core::decls::Decls;
use qetlab_core::pars::{lift_step, run, step, RunReport, WeightedDist};
use qetlab_core::source::{alpha_eq, pretty, SType, Term};
use qetlab_core::typecheck::check_term;

pub const MASS_TOL: f64 = 1e-12;

fn same_dist(a: &WeightedDist, b: &WeightedDist) -> bool {
    a.entries.len() == b.entries.len()
        && a.entries.iter().zip(&b.entries).all(|((s, p), (t, q))| p == q && alpha_eq(s, t, 0.0))
}

fn same_run(a: &RunReport, b: &RunReport) -> bool {
    a.accumulated_cost == b.accumulated_cost
        && a.trace == b.trace
        && a.pruned == b.pruned
        && same_dist(&a.live, &b.live)
        && same_dist(&a.normal_forms, &b.normal_forms)
}

/// Normal-form mass and cost never decrease with depth, and every normal
/// form's weight at depth `d` is at most its weight at any later depth.
pub fn nf_monotone(decls: &Decls, t: &Term, max_depth: usize) -> Result<(), String> {
    let full = run(decls, t, max_depth).map_err(|e| e.to_string())?;
    for w in full.trace.windows(2) {
        if w[1].nf_mass + MASS_TOL < w[0].nf_mass {
            return Err(format!("nf mass drops at depth {}: {} -> {}", w[1].depth, w[0].nf_mass, w[1].nf_mass));
        }
        if w[1].cost + MASS_TOL < w[0].cost {
            return Err(format!("cost drops at depth {}", w[1].depth));
        }
    }
    let mut depths: Vec<usize> = [0, 1, 2, 3, 5, 8, 13, 21, 34].into_iter().filter(|d| *d <= max_depth).collect();
    depths.push(max_depth);
    let runs: Vec<RunReport> = depths.iter().map(|&d| run(decls, t, d).map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    for (i, lo) in runs.iter().enumerate() {
        for hi in &runs[i + 1..] {
            for (v, p) in &lo.normal_forms.entries {
                let q = hi.normal_forms.weight_of(v);
                if q + MASS_TOL < *p {
                    return Err(format!("nf weight of {} drops from {p} at depth {} to {q} at depth {}", pretty(v), lo.depth, hi.depth));
                }
            }
        }
    }
    let total = full.normal_forms.mass() + full.live.mass() + full.pruned;
    if (total - 1.0).abs() > MASS_TOL {
        return Err(format!("run mass {total} after depth {max_depth}"));
    }
    Ok(())
}

/// Walks `steps` lifted steps, checking that each step conserves mass up to
/// pruning, prunes at most [`MASS_TOL`], and produces only terms that
/// re-check at `ty`.
pub fn lifted_steps(decls: &Decls, t: &Term, ty: &SType, steps: usize, typecheck: bool) -> Result<usize, String> {
    let mut dist = WeightedDist::point(t.clone());
    let mut checked = 0;
    for k in 0..steps {
        let s = lift_step(decls, &dist).map_err(|e| e.to_string())?;
        let lost = dist.mass() - s.result.mass();
        if (lost - s.pruned).abs() > MASS_TOL || s.pruned > MASS_TOL {
            return Err(format!("step {k}: mass {} -> {} with {} pruned", dist.mass(), s.result.mass(), s.pruned));
        }
        if typecheck {
            for (u, _) in &s.result.entries {
                check_term(decls, &[], &[], u, ty).map_err(|e| format!("step {k}: {} fails to re-check: {e}", pretty(u)))?;
                checked += 1;
            }
        }
        if s.result.entries.iter().all(|(u, _)| u.is_value()) {
            break;
        }
        dist = s.result;
    }
    Ok(checked)
}

/// `step` and `run` are functions of their input.
pub fn deterministic(decls: &Decls, t: &Term, depth: usize) -> Result<(), String> {
    let mut cur = vec![t.clone()];
    for _ in 0..50 {
        let mut next = Vec::new();
        for u in &cur {
            let (a, b) = (step(decls, u), step(decls, u));
            match (a, b) {
                (Ok(None), Ok(None)) => {}
                (Ok(Some(a)), Ok(Some(b))) => {
                    let same = a.rule == b.rule
                        && a.cost == b.cost
                        && a.result.len() == b.result.len()
                        && a.result.iter().zip(&b.result).all(|((s, p), (t, q))| p == q && alpha_eq(s, t, 0.0));
                    if !same {
                        return Err(format!("step is not deterministic on {}", pretty(u)));
                    }
                    next.extend(a.result.into_iter().map(|(v, _)| v));
                }
                _ => return Err(format!("step outcome differs on {}", pretty(u))),
            }
        }
        next.truncate(8);
        cur = next;
    }
    let a = run(decls, t, depth).map_err(|e| e.to_string())?;
    let b = run(decls, t, depth).map_err(|e| e.to_string())?;
    if !same_run(&a, &b) {
        return Err("run is not deterministic".into());
    }
    Ok(())
}
