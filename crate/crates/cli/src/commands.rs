use std::path::Path;
use std::time::Duration;

use ::aqua::model::uniform_moment_matrix;
use ::aqua::scenario::{scheffe, spring_balance, synthetic_tall, Scenario, TallParams};
use ::aqua::{
    aqua_solve, efficiency, efficient_rounding, equivalence_gap, export_micqp, iterative_aqua, phi, solve_ad,
    AquaOptions, AquaResult, ConstraintSet, Criterion, DesignProblem, IterOptions, QuadModel, Scalar, SymMatrix,
};

use crate::args::{Cli, Command, Family, ScenarioArgs, ScenarioName, SolveArgs, Version};
use crate::error::{CliError, CliResult, EXIT_CAPS};
use crate::formats::{
    read_constraints, read_model, write_constraints, write_model, write_selected_csv, DesignDocument, MatrixFile,
};

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Approx(a) => cmd_approx(&a),
        Command::Exact { solve, anchor } => cmd_exact(&solve, anchor.as_deref()),
        Command::Iter {
            solve,
            subsample,
            max_iter,
            relax,
        } => cmd_iter(&solve, subsample, max_iter, relax),
        Command::Round { design, size, out } => cmd_round(&design, size, out.as_deref()),
        Command::Export { solve, anchor } => cmd_export(&solve, anchor.as_deref()),
        Command::Eval { solve, design, anchor } => cmd_eval(&solve, &design, anchor.as_deref()),
        Command::Scenario(s) => cmd_scenario(&s),
    }
}

/// Model, criterion and constraints assembled from the shared flags.
pub struct Setup {
    pub problem: DesignProblem<f64>,
    pub criterion: Criterion<f64>,
    pub constraints: ConstraintSet<f64>,
}

pub fn criterion_from(a: &SolveArgs, problem: &DesignProblem<f64>) -> CliResult<Criterion<f64>> {
    if a.gamma.is_some() && a.version != Version::Blend {
        return Err(CliError::Parse("--gamma needs --version blend".into()));
    }
    if a.criterion == Family::I {
        if a.version != Version::Pos || a.p.is_some_and(|p| p != 1) {
            return Err(CliError::Parse("I-optimality takes no --p or --version".into()));
        }
        let l = match &a.region {
            Some(path) => uniform_moment_matrix(&read_model(path)?)?,
            None => uniform_moment_matrix(problem)?,
        };
        return Ok(Criterion::i_optimality(l)?);
    }
    let p = a.p.unwrap_or(if a.criterion == Family::A { 1 } else { 0 });
    Ok(match a.version {
        Version::Pos => Criterion::Positive { p },
        Version::Neg => Criterion::Negative { p },
        Version::Blend => {
            let g = a.gamma.ok_or_else(|| CliError::Parse("--version blend needs --gamma".into()))?;
            Criterion::blend(p, g)?
        }
        Version::Logdet => {
            if p != 0 {
                return Err(CliError::Parse("--version logdet is the D criterion".into()));
            }
            Criterion::LogDet
        }
    })
}

pub fn setup(a: &SolveArgs) -> CliResult<Setup> {
    let problem = read_model(&a.model)?;
    let criterion = criterion_from(a, &problem)?;
    let mut constraints = match &a.constraints {
        Some(path) => read_constraints(path)?,
        None if a.size.is_some() => ConstraintSet::new(problem.n()),
        None => return Err(CliError::Parse("need --constraints or --N".into())),
    };
    if constraints.n() != problem.n() {
        return Err(CliError::Parse(format!(
            "constraints cover {} points, model has {}",
            constraints.n(),
            problem.n()
        )));
    }
    if let Some(n) = a.size {
        constraints.add_size(n as f64);
    }
    Ok(Setup {
        problem,
        criterion,
        constraints,
    })
}

fn aqua_options(a: &SolveArgs) -> AquaOptions<f64> {
    let mut o = AquaOptions::default();
    o.ad.seed = a.seed;
    o.bnb.gap = a.gap;
    o.bnb.threads = a.threads.max(1);
    if let Some(c) = a.node_cap {
        o.bnb.node_cap = c;
    }
    o.bnb.time_cap = a.time_cap.map(Duration::from_secs_f64);
    o
}

fn warn_small(a: &SolveArgs, s: &Setup) {
    if let Some(n) = a.size {
        if n as usize <= s.problem.m() {
            eprintln!(
                "warning: N = {n} does not exceed the number of parameters m = {}; the surrogate optimum may be far from the best exact design",
                s.problem.m()
            );
        }
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

fn matrix_rows(m: &SymMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.order()).map(|i| (0..m.order()).map(|j| m.get(i, j)).collect()).collect()
}

fn emit(doc: &DesignDocument, out: Option<&Path>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(doc)?;
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn finish(a: &SolveArgs, s: &Setup, doc: DesignDocument) -> CliResult<()> {
    let doc = DesignDocument {
        labels: s.problem.labels().map(<[String]>::to_vec),
        ..doc
    };
    if let Some(csv) = &a.csv {
        write_selected_csv(csv, &s.problem, &doc.weights)?;
    }
    emit(&doc, a.out.as_deref())
}

/// Reads an anchor given as `{"matrix": ...}` or as a design document.
pub fn read_anchor(path: &Path, problem: &DesignProblem<f64>) -> CliResult<SymMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(mf) = serde_json::from_str::<MatrixFile>(&text) {
        let m = mf.matrix.len();
        if m != problem.m() || mf.matrix.iter().any(|r| r.len() != m) {
            return Err(CliError::Parse(format!("anchor must be {0}x{0}", problem.m())));
        }
        let flat: Vec<f64> = mf.matrix.concat();
        return Ok(SymMatrix::from_row_slice(m, &flat)?);
    }
    let doc = DesignDocument::read(path)?;
    Ok(problem.info_from_weights(&doc.weights)?)
}

fn anchor_for(a: &SolveArgs, s: &Setup, anchor: Option<&Path>) -> CliResult<SymMatrix<f64>> {
    match anchor {
        Some(p) => read_anchor(p, &s.problem),
        None => {
            let o = aqua_options(a);
            Ok(solve_ad(&s.problem, &s.criterion, &s.constraints, &o.ad)?.info)
        }
    }
}

pub fn cmd_approx(a: &SolveArgs) -> CliResult<i32> {
    let s = setup(a)?;
    let o = aqua_options(a);
    let sol = solve_ad(&s.problem, &s.criterion, &s.constraints, &o.ad)?;
    let mut doc = DesignDocument::new("approx", s.criterion.to_string(), sol.design.weights().to_vec())
        .with_report("equivalence_gap", sol.gap)
        .with_report("iterations", sol.iterations)
        .with_report("converged", sol.converged)
        .with_report("information_matrix", matrix_rows(&sol.info));
    doc.criterion_value = finite(sol.value);
    doc.efficiency_bound = Some(1.0);
    finish(a, &s, doc)?;
    Ok(0)
}

fn exact_document(command: &str, s: &Setup, res: &AquaResult<f64>) -> (DesignDocument, bool) {
    let mut doc = DesignDocument::new(command, s.criterion.to_string(), res.design.weights().to_vec())
        .with_report("surrogate_value", finite(res.surrogate))
        .with_report("anchor_value", finite(res.anchor_value))
        .with_report("anchor", matrix_rows(&res.anchor))
        .with_report("converged", res.converged);
    doc.criterion_value = finite(res.value);
    doc.efficiency_bound = res.efficiency.and_then(finite);
    let mut capped = false;
    if let Some(r) = &res.report {
        capped = r.termination.hit_cap();
        doc = doc
            .with_report("termination", r.termination.as_str())
            .with_report("surrogate_upper_bound", finite(r.upper_bound))
            .with_report("gap", finite(r.gap))
            .with_report("nodes", r.nodes)
            .with_report("improvements", r.improvements)
            .with_report("wall_time_s", r.wall_time.as_secs_f64());
    }
    if !res.history.is_empty() {
        let hist: Vec<_> = res
            .history
            .iter()
            .map(|h| {
                serde_json::json!({
                    "iteration": h.iteration,
                    "value": finite(h.value),
                    "surrogate": finite(h.surrogate),
                    "anchor_change": finite(h.anchor_change),
                    "integral": h.integral,
                })
            })
            .collect();
        doc = doc.with_report("history", hist);
    }
    (doc, capped)
}

pub fn cmd_exact(a: &SolveArgs, anchor: Option<&Path>) -> CliResult<i32> {
    let s = setup(a)?;
    warn_small(a, &s);
    let mut o = aqua_options(a);
    if let Some(p) = anchor {
        o.anchor = Some(read_anchor(p, &s.problem)?);
    }
    let res = aqua_solve(&s.problem, &s.criterion, &s.constraints, &o)?;
    let (doc, capped) = exact_document("exact", &s, &res);
    finish(a, &s, doc)?;
    Ok(if capped { EXIT_CAPS } else { 0 })
}

pub fn cmd_iter(a: &SolveArgs, subsample: usize, max_iter: usize, relax: bool) -> CliResult<i32> {
    let s = setup(a)?;
    warn_small(a, &s);
    let opts = IterOptions {
        aqua: aqua_options(a),
        subsample_size: subsample,
        seed: a.seed,
        relax_intermediate: relax,
        max_iter,
        ..IterOptions::default()
    };
    let res = iterative_aqua(&s.problem, &s.criterion, &s.constraints, &opts)?;
    let (doc, capped) = exact_document("iter", &s, &res);
    finish(a, &s, doc)?;
    Ok(if capped { EXIT_CAPS } else { 0 })
}

pub fn cmd_round(design: &Path, size: u64, out: Option<&Path>) -> CliResult<i32> {
    let src = DesignDocument::read(design)?;
    let support: Vec<usize> = (0..src.weights.len()).filter(|&i| src.weights[i] > 0.0).collect();
    let w: Vec<f64> = support.iter().map(|&i| src.weights[i]).collect();
    let counts = efficient_rounding(&w, size)?;
    let mut weights = vec![0.0; src.weights.len()];
    for (&i, &c) in support.iter().zip(&counts) {
        weights[i] = c as f64;
    }
    let mut doc = DesignDocument::new("round", src.criterion.clone(), weights).with_report("support", support.len());
    doc.labels = src.labels;
    emit(&doc, out)?;
    Ok(0)
}

pub fn cmd_export(a: &SolveArgs, anchor: Option<&Path>) -> CliResult<i32> {
    let out = a
        .out
        .as_deref()
        .ok_or_else(|| CliError::Parse("export needs --out".into()))?;
    let s = setup(a)?;
    let m = anchor_for(a, &s, anchor)?;
    let q = QuadModel::build(&s.problem, &s.criterion, &m, f64::FACTOR_TOL)?;
    export_micqp(&q, &s.constraints, out)?;
    Ok(0)
}

pub fn cmd_eval(a: &SolveArgs, design: &Path, anchor: Option<&Path>) -> CliResult<i32> {
    let s = setup(a)?;
    let doc_in = DesignDocument::read(design)?;
    if doc_in.weights.len() != s.problem.n() {
        return Err(CliError::Parse(format!(
            "design has {} weights, model has {} points",
            doc_in.weights.len(),
            s.problem.n()
        )));
    }
    let info = s.problem.info_from_weights(&doc_in.weights)?;
    let reference = anchor_for(a, &s, anchor)?;
    let value = phi(&s.criterion, &info);
    let eff = efficiency(&s.criterion, &info, &reference)?;
    let gap = equivalence_gap(&s.problem, &s.criterion, &doc_in.weights, &s.constraints).ok();
    let mut doc = DesignDocument::new("eval", s.criterion.to_string(), doc_in.weights)
        .with_report("reference_value", finite(phi(&s.criterion, &reference)))
        .with_report("equivalence_gap", gap.and_then(finite));
    doc.criterion_value = finite(value);
    doc.efficiency_bound = finite(eff);
    finish(a, &s, doc)?;
    Ok(0)
}

pub fn build_scenario(a: &ScenarioArgs) -> CliResult<Scenario<f64>> {
    Ok(match a.name {
        ScenarioName::SpringBalance => {
            let m = a.m.unwrap_or(6);
            spring_balance(m, a.size.unwrap_or(m as u64 + 1))?
        }
        ScenarioName::Scheffe => scheffe(a.step.unwrap_or(0.1), a.size)?,
        ScenarioName::SyntheticTall => {
            let d = TallParams::default();
            synthetic_tall(&TallParams {
                n: a.n.unwrap_or(d.n),
                m: a.m.unwrap_or(d.m),
                strata: a.strata.unwrap_or(d.strata),
                seed: a.seed,
            })?
        }
    })
}

pub fn cmd_scenario(a: &ScenarioArgs) -> CliResult<i32> {
    let sc = build_scenario(a)?;
    std::fs::create_dir_all(&a.out)?;
    write_model(&a.out.join("model.csv"), &sc.problem)?;
    write_constraints(&a.out.join("constraints.json"), &sc.constraints)?;
    eprintln!(
        "wrote {} points, {} parameters, {} constraint rows to {}",
        sc.problem.n(),
        sc.problem.m(),
        sc.constraints.rows().len(),
        a.out.display()
    );
    Ok(0)
}
