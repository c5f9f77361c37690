use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use skillsym::planner::{answer_query_from, options_smdp, refine, PlanMethod};
use skillsym::{Hierarchy, StateId};
use taxi::bench::{run_benchmark, write_csv, write_json};
use taxi::options::describe;
use taxi::pddl::{export_pddl, taxi_problem};
use taxi::{build_hierarchy, build_taxi, benchmark_queries, QuerySpec, StatePredicate, Taxi, TaxiError, TaxiSpec};

#[derive(Parser)]
#[command(name = "skillsym", version, about = "Skill-symbol hierarchies and hierarchical planning on Taxi")]
struct Cli {
    #[command(flatten)]
    domain: DomainArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DomainArgs {
    /// Taxi layout as JSON (grid size, walls, depots). Defaults to the
    /// canonical 5×5 layout.
    #[arg(long, global = true)]
    layout: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build and validate the three-level hierarchy; print a JSON snapshot.
    Build {
        /// Write the snapshot here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer a plan query and refine the plan to base actions.
    Plan {
        /// JSON query file with `B` and `G` constraint objects.
        #[arg(long, conflicts_with_all = ["start", "goal"])]
        query: Option<PathBuf>,
        /// Start constraints, e.g. `pass-at=blue,taxi-at=any-depot,in-taxi=false`.
        #[arg(long = "B", alias = "b", requires = "goal")]
        start: Option<StatePredicate>,
        /// Goal constraints, e.g. `pass-at=1:4`.
        #[arg(long = "G", alias = "g", requires = "start")]
        goal: Option<StatePredicate>,
        /// Start the top-down search at this level instead of the top.
        #[arg(long)]
        at_level: Option<usize>,
        #[arg(long, value_enum, default_value_t = Method::Reachability)]
        method: Method,
    },
    /// Time hierarchical, options-augmented and flat planning.
    Bench {
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        out: Format,
        /// Query files to time instead of the three built-in queries.
        #[arg(long)]
        query: Vec<PathBuf>,
    },
    /// Export an abstract level as a STRIPS domain and problem.
    ExportPddl {
        #[arg(long)]
        level: usize,
        /// Query used for the problem's initial state and goal; defaults to
        /// Q1.
        #[arg(long)]
        query: Option<PathBuf>,
        /// Write the domain here instead of stdout.
        #[arg(long)]
        domain_out: Option<PathBuf>,
        /// Write the problem here instead of stdout.
        #[arg(long)]
        problem_out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Reachability,
    ValueIteration,
}

impl From<Method> for PlanMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Reachability => PlanMethod::Reachability,
            Method::ValueIteration => PlanMethod::ValueIteration,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Serialize)]
struct LevelReport {
    level: usize,
    states: usize,
    match_ops: u64,
    plan_ops: Option<u64>,
    match_ms: f64,
    plan_ms: Option<f64>,
}

#[derive(Serialize)]
struct StartReport {
    start: String,
    abstract_start: String,
    plan: Vec<String>,
    base_actions: Vec<String>,
    end: String,
}

#[derive(Serialize)]
struct PlanReport {
    query: String,
    start_set: usize,
    goal_set: usize,
    search_from: usize,
    solution_level: Option<usize>,
    first_match: Option<usize>,
    h: Option<f64>,
    levels: Vec<LevelReport>,
    starts: Vec<StartReport>,
}

fn load(domain: &DomainArgs) -> Result<(Taxi, Hierarchy), TaxiError> {
    let spec = match &domain.layout {
        Some(path) => TaxiSpec::from_json_file(path)?,
        None => TaxiSpec::canonical(),
    };
    let taxi = build_taxi(&spec)?;
    let h = build_hierarchy(&taxi)?;
    Ok((taxi, h))
}

fn emit(text: &str, path: Option<&PathBuf>) -> Result<(), TaxiError> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn build(domain: &DomainArgs, out: Option<PathBuf>) -> Result<ExitCode, TaxiError> {
    let (_, h) = load(domain)?;
    let violations = h.validate();
    for v in &violations {
        eprintln!("violation: {v}");
    }
    let text = serde_json::to_string_pretty(&h.snapshot())? + "\n";
    emit(&text, out.as_ref())?;
    let sizes: Vec<String> = (0..=h.depth()).map(|j| h.num_states(j).to_string()).collect();
    eprintln!("levels: {}", sizes.join(" / "));
    Ok(if violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn plan(
    domain: &DomainArgs,
    q: QuerySpec,
    at_level: Option<usize>,
    method: PlanMethod,
) -> Result<ExitCode, TaxiError> {
    let (taxi, h) = load(domain)?;
    let pq = q.expand(&taxi)?;
    let top = at_level.unwrap_or(h.depth());
    let answer = answer_query_from(&h, &pq, method, top)?;
    let mut report = PlanReport {
        query: q.name().to_string(),
        start_set: pq.start().len(),
        goal_set: pq.goal().len(),
        search_from: top,
        solution_level: None,
        first_match: None,
        h: None,
        levels: Vec::new(),
        starts: Vec::new(),
    };
    let Some(ans) = answer else {
        emit(&(serde_json::to_string_pretty(&report)? + "\n"), None)?;
        return Ok(ExitCode::from(2));
    };
    let rec = &ans.record;
    report.solution_level = rec.solution;
    report.first_match = rec.first_match;
    report.h = rec.h;
    report.levels = rec
        .levels
        .iter()
        .map(|c| LevelReport {
            level: c.level,
            states: c.states,
            match_ops: c.match_ops,
            plan_ops: c.plan_ops,
            match_ms: c.match_time.as_secs_f64() * 1e3,
            plan_ms: c.plan_time.map(|t| t.as_secs_f64() * 1e3),
        })
        .collect();
    let m = h.level_mdp(ans.level).expect("solution level exists");
    for x in pq.start().iter() {
        let s = ans
            .pair
            .b
            .iter()
            .find(|&s| h.grounds_to(ans.level, s, x))
            .expect("every start is covered");
        let plan = ans
            .plan
            .actions_from(m, s)
            .unwrap_or_default()
            .into_iter()
            .map(|a| m.action_name(a).to_string())
            .collect();
        let trace = refine(&h, &ans.plan, x)?;
        report.starts.push(StartReport {
            start: describe(h.base(), x),
            abstract_start: describe(m, s),
            plan,
            base_actions: trace.actions.iter().map(|&a| h.base().action_name(a).to_string()).collect(),
            end: describe(h.base(), trace.end),
        });
    }
    emit(&(serde_json::to_string_pretty(&report)? + "\n"), None)?;
    Ok(ExitCode::SUCCESS)
}

fn bench(domain: &DomainArgs, reps: usize, format: Format, files: &[PathBuf]) -> Result<ExitCode, TaxiError> {
    let (taxi, h) = load(domain)?;
    let specs = if files.is_empty() {
        benchmark_queries()
    } else {
        files.iter().map(|p| QuerySpec::from_json_file(p)).collect::<Result<_, _>>()?
    };
    let queries = specs
        .iter()
        .map(|q| Ok((q.name().to_string(), q.expand(&taxi)?)))
        .collect::<Result<Vec<_>, TaxiError>>()?;
    let smdp = options_smdp(&h)?;
    let rows = run_benchmark(&h, &smdp, &queries, reps)?;
    let stdout = std::io::stdout().lock();
    match format {
        Format::Csv => write_csv(stdout, &rows)?,
        Format::Json => write_json(stdout, &rows)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn export(
    domain: &DomainArgs,
    level: usize,
    query: Option<PathBuf>,
    domain_out: Option<PathBuf>,
    problem_out: Option<PathBuf>,
) -> Result<ExitCode, TaxiError> {
    let (taxi, h) = load(domain)?;
    let q = match query {
        Some(p) => QuerySpec::from_json_file(&p)?,
        None => taxi::query::query1(),
    };
    let (init, goal): (StateId, _) = taxi_problem(&h, &taxi, level, &q)?;
    let out = export_pddl(&h, level, init, &goal)?;
    emit(&out.domain, domain_out.as_ref())?;
    if domain_out.is_none() && problem_out.is_none() {
        emit("\n", None)?;
    }
    emit(&out.problem, problem_out.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode, TaxiError> {
    match cli.command {
        Command::Build { out } => build(&cli.domain, out),
        Command::Plan {
            query,
            start,
            goal,
            at_level,
            method,
        } => {
            let q = match (query, start, goal) {
                (Some(path), _, _) => QuerySpec::from_json_file(&path)?,
                (None, Some(b), Some(g)) => QuerySpec::new("query", b, g),
                _ => return Err(TaxiError::Predicate("give --query FILE or both --B and --G".into())),
            };
            plan(&cli.domain, q, at_level, method.into())
        }
        Command::Bench { reps, out, query } => bench(&cli.domain, reps, out, &query),
        Command::ExportPddl {
            level,
            query,
            domain_out,
            problem_out,
        } => export(&cli.domain, level, query, domain_out, problem_out),
    }
}

fn main() -> ExitCode {
    // Exit code 2 means "no plan", so usage errors report 1 instead of
    // clap's default.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
