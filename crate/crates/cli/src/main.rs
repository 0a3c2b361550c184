use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use qetlab_core::corpus::{corpus, corpus_file, verify_entry, CorpusOutcome};
use qetlab_core::cost::{instance_rplus, instance_unit_forgetful, CostStructure};
use qetlab_core::cs::{cs_check, cs_pretty, denote, denote_closed_cost, parse_cs_program, parse_cs_term, CsTerm, CsTypeOptions, Env};
use qetlab_core::pars::{self, UNIT_FUEL};
use qetlab_core::qet::{cs_var, translate_term, translate_type, translate_value, zero_continuation};
use qetlab_core::refinement::{check_refined, parse_rty, Defs, OracleConfig, Structure, Verdict};
use qetlab_core::soundness::{
    check_expected_cost, check_expected_value, close_program, ComparisonReport, HarnessConfig, DEFAULT_BUDGET,
    DEFAULT_DEPTH, DEFAULT_TOL,
};
use qetlab_core::source::{parse_program, parse_type, pretty, Program};
use qetlab_core::typecheck::check_program;

#[derive(Parser)]
#[command(name = "qetlab", version, about = "Expected-cost analysis for higher-order quantum programs")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostChoice {
    Rplus,
    Unit,
}

#[derive(Subcommand)]
enum Cmd {
    /// Type-check a source program.
    Check {
        file: String,
        /// Check the main term against this type instead of its annotation.
        #[arg(long = "type")]
        ty: Option<String>,
    },
    /// Run the probabilistic rewrite system for a number of depth units.
    Run {
        file: String,
        #[arg(long, default_value_t = DEFAULT_DEPTH as u64, value_parser = clap::value_parser!(u64).range(1..))]
        depth: u64,
    },
    /// Monte-Carlo execution with seeded measurement outcomes.
    Sample {
        file: String,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        trials: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// Reduction steps per trial before it is abandoned.
        #[arg(long, default_value_t = UNIT_FUEL as u64, value_parser = clap::value_parser!(u64).range(1..))]
        step_budget: u64,
    },
    /// Translate a source program into a cost-structure term.
    Transform {
        file: String,
        /// `zero` or a `.csl` file holding a continuation term.
        #[arg(long, default_value = "zero")]
        continuation: String,
        #[arg(short = 'o', long)]
        output: Option<PathBuf>,
    },
    /// Denote a closed cost-structure program.
    Denote {
        file: String,
        #[arg(long, value_enum, default_value = "rplus")]
        cost_structure: CostChoice,
        #[arg(long, default_value_t = DEFAULT_BUDGET as u64, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
        /// Apply a function-valued main term to this value first.
        #[arg(long)]
        apply: Option<String>,
    },
    /// Compare operational and denotational expected cost (and value).
    Compare {
        file: String,
        #[arg(long)]
        continuation: Option<String>,
        #[arg(long, default_value_t = DEFAULT_DEPTH as u64, value_parser = clap::value_parser!(u64).range(1..))]
        depth: u64,
        #[arg(long, default_value_t = DEFAULT_BUDGET as u64, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Check a cost-structure term against a refinement type.
    VerifyBound {
        file: String,
        #[arg(long = "type")]
        ty: String,
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the `structure` line of the bound file.
        #[arg(long, value_enum)]
        cost_structure: Option<CostChoice>,
    },
    /// List or verify the bundled example corpus.
    Corpus {
        /// Only list entries.
        #[arg(long)]
        list: bool,
        /// Restrict to one entry.
        #[arg(long)]
        name: Option<String>,
        /// Print a bundled file and exit.
        #[arg(long)]
        show: Option<String>,
        #[arg(long, default_value_t = DEFAULT_DEPTH as u64, value_parser = clap::value_parser!(u64).range(1..))]
        depth: u64,
        #[arg(long, default_value_t = DEFAULT_BUDGET as u64, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Worker threads for verification.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        jobs: u64,
    },
}

/// Failure kinds mapped to exit codes.
enum Fail {
    /// The analysis ran and the answer is negative.
    Analysis(String),
    /// Bad input outside the analysis: unreadable file, malformed flag.
    Usage(String),
}

type Outcome = Result<bool, Fail>;

fn usage(msg: impl Into<String>) -> Fail {
    Fail::Usage(msg.into())
}

fn analysis(msg: impl ToString) -> Fail {
    Fail::Analysis(msg.to_string())
}

/// Reads a file; `corpus:NAME` refers to a bundled corpus file.
fn read_input(path: &str) -> Result<String, Fail> {
    if let Some(name) = path.strip_prefix("corpus:") {
        return corpus_file(name).map(str::to_string).ok_or_else(|| usage(format!("no corpus file `{name}`")));
    }
    std::fs::read_to_string(path).map_err(|e| usage(format!("{path}: {e}")))
}

fn seed_or_env(seed: Option<u64>, default: u64) -> Result<u64, Fail> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var("QETLAB_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| usage(format!("QETLAB_SEED: `{v}` is not an unsigned integer"))),
        Err(_) => Ok(default),
    }
}

fn check_tol(tol: f64) -> Result<(), Fail> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--tol must be positive, got {tol}")))
    }
}

fn load_program(path: &str) -> Result<Program, Fail> {
    parse_program(&read_input(path)?).map_err(|e| analysis(format!("{path}: {e}")))
}

/// Writes to stdout, ignoring a closed pipe.
fn out(s: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{s}");
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce() -> String) {
    if json {
        out(&serde_json::to_string_pretty(value).expect("reports serialize"));
    } else {
        out(&text());
    }
}

#[derive(Serialize)]
struct CheckOut<'a> {
    ok: bool,
    #[serde(rename = "type")]
    ty: Option<String>,
    errors: &'a [qetlab_core::typecheck::TypeError],
}

fn cmd_check(json: bool, file: &str, ty: Option<&str>) -> Outcome {
    let prog = load_program(file)?;
    let ty = ty.map(|t| parse_type(t).map_err(|e| usage(format!("--type: {e}")))).transpose()?;
    match check_program(&prog, ty.as_ref()) {
        Ok(t) => {
            emit(json, &CheckOut { ok: true, ty: Some(t.to_string()), errors: &[] }, || format!("ok : {t}"));
            Ok(true)
        }
        Err(errs) => {
            emit(json, &CheckOut { ok: false, ty: None, errors: &errs }, || {
                errs.iter().map(|e| format!("error: {e}")).collect::<Vec<_>>().join("\n")
            });
            Ok(false)
        }
    }
}

#[derive(Serialize)]
struct RunOut {
    program: String,
    depth: usize,
    accumulated_cost: f64,
    residual_mass: f64,
    pruned: f64,
    normal_forms: Vec<(String, f64)>,
    live: Vec<(String, f64)>,
    trace: Vec<pars::DepthStat>,
}

fn printed(d: &pars::WeightedDist) -> Vec<(String, f64)> {
    d.entries.iter().map(|(t, p)| (pretty(t), *p)).collect()
}

fn cmd_run(json: bool, file: &str, depth: usize) -> Outcome {
    let prog = load_program(file)?;
    let closed = close_program(&prog, &[]).map_err(analysis)?;
    let r = pars::run(&closed.decls, &closed.closed, depth).map_err(analysis)?;
    let out = RunOut {
        program: pretty(&closed.closed),
        depth: r.depth,
        accumulated_cost: r.accumulated_cost,
        residual_mass: r.residual_mass(),
        pruned: r.pruned,
        normal_forms: printed(&r.normal_forms),
        live: printed(&r.live),
        trace: r.trace.clone(),
    };
    emit(json, &out, || {
        let mut s = format!("depth {}: expected cost >= {} (residual mass {:e})\n", out.depth, out.accumulated_cost, out.residual_mass);
        for (t, p) in &out.normal_forms {
            s.push_str(&format!("  {p:.12}  {t}\n"));
        }
        s.trim_end().to_string()
    });
    Ok(true)
}

fn cmd_sample(json: bool, file: &str, trials: usize, seed: u64, step_budget: usize) -> Outcome {
    let prog = load_program(file)?;
    let closed = close_program(&prog, &[]).map_err(analysis)?;
    let r = pars::sample(&closed.decls, &closed.closed, seed, trials, step_budget).map_err(analysis)?;
    emit(json, &r, || {
        let mut s = format!(
            "seed {} trials {}: mean cost {} (std err {}), {} abandoned\n",
            r.seed, r.trials, r.mean_cost, r.std_err, r.guard_hits
        );
        for (t, n) in &r.histogram {
            s.push_str(&format!("  {n:>8}  {t}\n"));
        }
        s.trim_end().to_string()
    });
    Ok(true)
}

fn continuation_term(prog: &Program, spec: &str) -> Result<CsTerm, Fail> {
    if spec == "zero" {
        return Ok(zero_continuation());
    }
    parse_cs_term(&prog.decls, read_input(spec)?.trim()).map_err(|e| analysis(format!("{spec}: {e}")))
}

#[derive(Serialize)]
struct TransformOut {
    program: String,
}

fn cmd_transform(json: bool, file: &str, continuation: &str, output: Option<&PathBuf>) -> Outcome {
    let prog = load_program(file)?;
    check_program(&prog, None).map_err(|errs| analysis(errs.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")))?;
    let k = continuation_term(&prog, continuation)?;
    let term = prog.term.as_ref().ok_or_else(|| analysis("program has no main term"))?;
    let mut text = prog.decls.pretty();
    for i in &prog.inputs {
        text.push_str(&format!("input {} : {}", cs_var(&i.name), translate_type(&i.ty)));
        if let Some(v) = &i.value {
            text.push_str(&format!(" = {}", cs_pretty(&translate_value(v).map_err(analysis)?)));
        }
        text.push_str(";\n");
    }
    text.push_str("main : K\n");
    text.push_str(&cs_pretty(&translate_term(term, &k).map_err(analysis)?));
    text.push('\n');
    if let Some(path) = output {
        std::fs::write(path, &text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }
    if output.is_none() || json {
        emit(json, &TransformOut { program: text.clone() }, || text.trim_end().to_string());
    }
    Ok(true)
}

#[derive(Serialize)]
struct DenoteOut {
    cost_structure: &'static str,
    value: f64,
    residual: f64,
    converged: bool,
    exact: bool,
    budget: usize,
}

fn denote_with<K: CostStructure<Scalar = f64>>(
    cs: &K,
    name: &'static str,
    src: &str,
    apply: Option<&str>,
    budget: usize,
) -> Result<DenoteOut, Fail> {
    let prog = parse_cs_program(src).map_err(analysis)?;
    let term = prog.term.clone().ok_or_else(|| analysis("program has no main term"))?;
    let term = match apply {
        Some(v) => CsTerm::app(term, parse_cs_term(&prog.decls, v).map_err(|e| usage(format!("--apply: {e}")))?),
        None => term,
    };
    let opts = CsTypeOptions { k_is_real: true };
    let mut theta = Vec::new();
    for i in &prog.inputs {
        if let Some(v) = &i.value {
            cs_check(&prog.decls, &[], v, &i.ty, opts).map_err(|e| analysis(format!("input {}: {e}", i.name)))?;
        }
        theta.push((i.name.clone(), i.ty.clone()));
    }
    if apply.is_none() {
        if let Some(ty) = &prog.main_ty {
            cs_check(&prog.decls, &theta, &term, ty, opts).map_err(analysis)?;
        }
    }
    let mut env = Env::empty();
    for i in &prog.inputs {
        let v = i.value.as_ref().ok_or_else(|| analysis(format!("input {} has no value", i.name)))?;
        let d = denote(cs, &prog.decls, v, &env, budget).map_err(analysis)?;
        env = env.bind(&i.name, d.value);
    }
    let r = denote_closed_cost(cs, &prog.decls, &term, &env, budget, 1e-9).map_err(analysis)?;
    Ok(DenoteOut {
        cost_structure: name,
        value: cs.to_real(&r.value).to_f64(),
        residual: r.residual,
        converged: r.converged,
        exact: r.exact,
        budget: r.budget,
    })
}

fn cmd_denote(json: bool, file: &str, choice: CostChoice, budget: usize, apply: Option<&str>) -> Outcome {
    let src = read_input(file)?;
    let out = match choice {
        CostChoice::Rplus => denote_with(&instance_rplus(), "rplus", &src, apply, budget)?,
        CostChoice::Unit => denote_with(&instance_unit_forgetful(), "unit", &src, apply, budget)?,
    };
    emit(json, &out, || {
        format!("{} (converged: {}, residual {:e}, budget {})", out.value, out.converged, out.residual, out.budget)
    });
    Ok(true)
}

fn report_line(r: &ComparisonReport) -> String {
    format!(
        "{} {:?}: operational {} (depth {}, residual {:e}) vs denotational {} (budget {}) gap {:e} -> {}",
        r.program,
        r.observable,
        r.operational,
        r.depth,
        r.residual_mass,
        r.denotational,
        r.budget,
        r.gap,
        if r.pass { "pass" } else { "FAIL" }
    )
}

fn cmd_compare(json: bool, file: &str, continuation: Option<&str>, cfg: HarnessConfig) -> Outcome {
    check_tol(cfg.tol)?;
    let prog = load_program(file)?;
    let mut reports = vec![check_expected_cost(file, &prog, &[], cfg).map_err(analysis)?];
    if let Some(k) = continuation {
        let k = continuation_term(&prog, k)?;
        reports.push(check_expected_value(file, &prog, &[], &k, cfg).map_err(analysis)?);
    }
    emit(json, &reports, || reports.iter().map(report_line).collect::<Vec<_>>().join("\n"));
    Ok(reports.iter().all(|r| r.pass))
}

#[derive(Serialize)]
struct VerifyOut {
    verdict: String,
    falsified: bool,
    witness_replays: Option<bool>,
    report: qetlab_core::refinement::CheckReport,
}

fn cmd_verify(json: bool, file: &str, rty: &str, cfg: OracleConfig, structure: Option<CostChoice>) -> Outcome {
    let prog = parse_cs_program(&read_input(file)?).map_err(|e| analysis(format!("{file}: {e}")))?;
    let term = prog.term.clone().ok_or_else(|| analysis(format!("{file}: no term")))?;
    let bound = parse_rty(&prog.decls, &read_input(rty)?).map_err(|e| analysis(format!("{rty}: {e}")))?;
    let structure = match structure {
        Some(CostChoice::Rplus) => Structure::RealsPlus,
        Some(CostChoice::Unit) => Structure::UnitForgetful,
        None => bound.structure,
    };
    let mut defs = Defs::new(bound.decls.clone(), structure);
    defs.candidates = bound.candidates.clone();
    let report = check_refined(&defs, &bound.context, &term, &bound.ty, &cfg).map_err(analysis)?;
    let replays = match &report.verdict {
        Verdict::Falsified(w) => Some(w.replay(&defs)),
        _ => None,
    };
    let out = VerifyOut {
        verdict: report.verdict.to_string(),
        falsified: report.verdict.is_falsified(),
        witness_replays: replays,
        report,
    };
    emit(json, &out, || {
        let mut s = String::new();
        for l in &out.report.trace {
            s.push_str(&format!("[{}] {} : {}\n", l.rule, l.detail, l.verdict));
        }
        s.push_str(&format!("verdict: {}", out.verdict));
        if let Verdict::Falsified(w) = &out.report.verdict {
            let vals: Vec<String> = w.valuation.iter().map(|(x, v)| format!("{x} = {v}")).collect();
            s.push_str(&format!("\nwitness (seed {}, sample {}): {}", w.seed, w.sample, vals.join(", ")));
        }
        s
    });
    Ok(!out.falsified)
}

#[derive(Serialize)]
struct CorpusListing {
    name: &'static str,
    file: &'static str,
}

fn cmd_corpus(json: bool, list: bool, name: Option<&str>, show: Option<&str>, cfg: HarnessConfig, jobs: usize) -> Outcome {
    check_tol(cfg.tol)?;
    if let Some(f) = show {
        let src = corpus_file(f).ok_or_else(|| usage(format!("no corpus file `{f}`")))?;
        out(src.trim_end());
        return Ok(true);
    }
    let entries: Vec<_> = corpus().into_iter().filter(|e| name.is_none_or(|n| n == e.name)).collect();
    if entries.is_empty() {
        return Err(usage(format!("no corpus entry `{}`", name.unwrap_or_default())));
    }
    if list {
        let listing: Vec<_> = entries.iter().map(|e| CorpusListing { name: e.name, file: e.file }).collect();
        emit(json, &listing, || listing.iter().map(|l| format!("{:<18} {}", l.name, l.file)).collect::<Vec<_>>().join("\n"));
        return Ok(true);
    }
    let chunk = entries.len().div_ceil(jobs.max(1));
    let outcomes: Vec<CorpusOutcome> = std::thread::scope(|s| {
        let handles: Vec<_> = entries
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|e| verify_entry(e, cfg)).collect::<Vec<_>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("corpus worker")).collect()
    });
    emit(json, &outcomes, || {
        let mut s = String::new();
        for o in &outcomes {
            s.push_str(&format!("{} {}\n", if o.pass { "pass" } else { "FAIL" }, o.name));
            for c in &o.checks {
                let mark = if c.pass { " " } else { "!" };
                s.push_str(&format!("  {mark} {}: expected {}, got {}\n", c.what, c.expected, c.actual));
            }
        }
        s.trim_end().to_string()
    });
    Ok(outcomes.iter().all(|o| o.pass))
}

fn dispatch(cli: Cli) -> Outcome {
    let json = cli.json;
    let harness = |depth: u64, budget: u64, tol: f64| HarnessConfig { depth: depth as usize, budget: budget as usize, tol };
    match cli.cmd {
        Cmd::Check { file, ty } => cmd_check(json, &file, ty.as_deref()),
        Cmd::Run { file, depth } => cmd_run(json, &file, depth as usize),
        Cmd::Sample { file, trials, seed, step_budget } => {
            cmd_sample(json, &file, trials as usize, seed_or_env(seed, 0)?, step_budget as usize)
        }
        Cmd::Transform { file, continuation, output } => cmd_transform(json, &file, &continuation, output.as_ref()),
        Cmd::Denote { file, cost_structure, budget, apply } => {
            cmd_denote(json, &file, cost_structure, budget as usize, apply.as_deref())
        }
        Cmd::Compare { file, continuation, depth, budget, tol } => {
            cmd_compare(json, &file, continuation.as_deref(), harness(depth, budget, tol))
        }
        Cmd::VerifyBound { file, ty, samples, seed, cost_structure } => {
            let defaults = OracleConfig::default();
            let cfg = OracleConfig { samples: samples as usize, seed: seed_or_env(seed, defaults.seed)?, ..defaults };
            cmd_verify(json, &file, &ty, cfg, cost_structure)
        }
        Cmd::Corpus { list, name, show, depth, budget, tol, jobs } => {
            cmd_corpus(json, list, name.as_deref(), show.as_deref(), harness(depth, budget, tol), jobs as usize)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.json;
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Fail::Analysis(msg)) => {
            if json {
                out(&serde_json::json!({ "ok": false, "error": msg }).to_string());
            } else {
                eprintln!("error: {msg}");
            }
            ExitCode::from(1)
        }
        Err(Fail::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
    }
}
