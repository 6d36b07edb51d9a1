use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;
use unitsel_core::ac::ac_rmap_with;
use unitsel_core::bench::{build_benefit_instance, dag_to_scm, generate_dag, select_roles, GenConfig, OutcomeMode, BENEFIT_WEIGHTS, MAX_ATTEMPTS};
use unitsel_core::circuit::{check_structure_for, check_u_determinism, read_dump, write_dump, Compiler, DecisionAC, DETERMINISM_BUDGET};
use unitsel_core::objective::{compose_objective, shift_weights};
use unitsel_core::oracle::{brute_rmap, DEFAULT_BUDGET};
use unitsel_core::order::minfill_order;
use unitsel_core::ve::{RmapResult, VeSolver};
use unitsel_core::{Error, Evidence, Network, VarId};

use crate::format::{self, FormatError, QueryDoc, RolesDoc};
use crate::harness::{self, BenchConfig, Engines};

#[derive(Parser, Debug)]
#[command(name = "unitsel", version, about = "Exact causal unit selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Leaf,
    ChildOfLeaves,
}

impl From<Mode> for OutcomeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Leaf => OutcomeMode::Leaf,
            Mode::ChildOfLeaves => OutcomeMode::ChildOfLeaves,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Engine {
    Brute,
    Ve,
    Ac,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    #[default]
    Text,
    Json,
}

#[derive(clap::Args, Debug)]
struct QueryArgs {
    /// Objective-model network file.
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated unit names [default: from the model's query sidecar].
    #[arg(long)]
    units: Option<String>,
    /// NAME=VALUE list [default: from the sidecar].
    #[arg(long)]
    e1: Option<String>,
    /// NAME=VALUE list [default: from the sidecar].
    #[arg(long)]
    e2: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a random SCM and roles.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        index: u32,
        #[arg(long, value_enum, default_value_t = Mode::Leaf)]
        outcome_mode: Mode,
        /// Directory receiving scm.json and roles.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compose the objective model of an objective function on an SCM.
    BuildObjective {
        #[arg(long)]
        scm: PathBuf,
        #[arg(long, conflicts_with = "benefit", required_unless_present = "benefit")]
        objective: Option<PathBuf>,
        /// Roles file; builds the benefit objective for its units, treatment
        /// and outcome.
        #[arg(long)]
        benefit: Option<PathBuf>,
        /// Model file; the query sidecar goes next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compile an objective model into a decision circuit.
    Compile {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        units: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Keep zero and one parameters instead of folding them.
        #[arg(long)]
        no_simplify: bool,
    },
    /// Solve the reverse-MAP query with one engine.
    Solve {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, value_enum)]
        engine: Engine,
        /// Use a circuit written by `compile` instead of compiling.
        #[arg(long)]
        load_circuit: Option<PathBuf>,
        /// Seconds.
        #[arg(long)]
        timeout: Option<f64>,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
    /// Run random instances through the engines and write a CSV.
    Bench {
        /// Comma-separated node counts.
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 6)]
        p: usize,
        #[arg(long, default_value_t = 10)]
        instances: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "ve,ac")]
        engines: String,
        /// Seconds per engine per instance.
        #[arg(long, default_value_t = 600.0)]
        timeout: f64,
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value_t = Mode::Leaf)]
        outcome_mode: Mode,
    },
    /// Run every engine and check that the optimal values agree.
    Verify {
        #[command(flatten)]
        query: QueryArgs,
        /// Circuit for the ac engine instead of compiling one.
        #[arg(long)]
        load_circuit: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: OutputFormat,
    },
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Input(#[from] FormatError),
    #[error("{0}")]
    Core(Error),
    #[error("{0}")]
    Disagreement(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn is_engine_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::ScopeTooLarge { .. }
            | Error::BudgetExceeded { .. }
            | Error::Interrupted
            | Error::CertificateMissing
            | Error::PlanNotConstrained
            | Error::SupportViolation { .. }
    )
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(FormatError::Core(e)) | Failure::Core(e) if is_engine_failure(e) => 3,
            Failure::Input(_) | Failure::Core(_) => 2,
            Failure::Disagreement(_) => 4,
        }
    }
}

type Out<'a> = &'a mut dyn Write;

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 success, 1 usage, 2 invalid input, 3 engine failure, 4 engines
/// disagree.
pub fn run<I, T>(args: I, out: Out<'_>, err: Out<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(err, "error: {f}");
            f.exit_code()
        }
    }
}

fn dispatch(cmd: Command, out: Out<'_>) -> Result<(), Failure> {
    match cmd {
        Command::Generate { n, p, seed, index, outcome_mode, out: dir } => generate(n, p, seed, index, outcome_mode.into(), &dir, out),
        Command::BuildObjective { scm, objective, benefit, out: path } => build_objective(&scm, objective.as_deref(), benefit.as_deref(), &path, out),
        Command::Compile { model, units, out: path, no_simplify } => compile(&model, units.as_deref(), &path, !no_simplify, out),
        Command::Solve { query, engine, load_circuit, timeout, format } => solve(&query, engine, load_circuit.as_deref(), timeout, format, out),
        Command::Bench { n_list, p, instances, seed, engines, timeout, csv, jobs, outcome_mode } => {
            let engines = Engines::parse(&engines).map_err(FormatError::Invalid)?;
            if !timeout.is_finite() || timeout < 0.0 {
                return Err(FormatError::Invalid("timeout must be a non-negative number of seconds".into()).into());
            }
            if n_list.iter().any(|&n| n < 3) {
                return Err(FormatError::Invalid("every n must be at least 3".into()).into());
            }
            if p == 0 {
                return Err(FormatError::Invalid("p must be at least 1".into()).into());
            }
            let cfg = BenchConfig {
                n_list,
                p,
                instances,
                seed,
                engines,
                timeout: Duration::from_secs_f64(timeout),
                jobs,
                outcome_mode: outcome_mode.into(),
            };
            let records = harness::run_bench(&cfg);
            let mut buf = Vec::new();
            harness::write_csv(&mut buf, &records).map_err(|e| FormatError::Invalid(e.to_string()))?;
            format::write_file(&csv, std::str::from_utf8(&buf).expect("csv is utf-8"))?;
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            let _ = writeln!(out, "{} instance(s), {} with engine errors; wrote {}", records.len(), failed, csv.display());
            for r in records.iter().filter(|r| r.error.is_some()) {
                let _ = writeln!(out, "  seed {} n {}: {}", r.seed, r.n, r.error.as_deref().unwrap_or(""));
            }
            if let Some(r) = records.iter().find(|r| r.agree == Some(false)) {
                return Err(Failure::Disagreement(format!("engines disagree on seed {} n {}", r.seed, r.n)));
            }
            Ok(())
        }
        Command::Verify { query, load_circuit, format } => verify(&query, load_circuit.as_deref(), format, out),
    }
}

fn generate(n: usize, p: usize, seed: u64, index: u32, mode: OutcomeMode, dir: &Path, out: Out<'_>) -> Result<(), Failure> {
    let cfg = GenConfig { n, p, seed, outcome_mode: mode };
    cfg.validate()?;
    let mut rng = cfg.rng(index);
    for _ in 0..MAX_ATTEMPTS {
        let dag = generate_dag(n, p, &mut rng);
        let scm = dag_to_scm(&dag, mode, &mut rng);
        if let Some(roles) = select_roles(&scm, &mut rng) {
            let net = &scm.network;
            let doc = RolesDoc {
                units: format::ids_to_names(net, &roles.units),
                treatment: net.name(roles.treatment).to_string(),
                outcome: net.name(roles.outcome).to_string(),
                n,
                p,
                seed,
                index,
                n_prime: scm.n_prime(),
            };
            format::write_file(&dir.join("scm.json"), &format::network_to_json(net))?;
            format::write_file(&dir.join("roles.json"), &format::roles_to_json(&doc))?;
            let _ = writeln!(
                out,
                "n' = {}, units = {}, treatment = {}, outcome = {}",
                doc.n_prime,
                doc.units.join(","),
                doc.treatment,
                doc.outcome
            );
            return Ok(());
        }
    }
    Err(Error::BudgetExceeded { limit: MAX_ATTEMPTS as u64 }.into())
}

fn load_network(path: &Path) -> Result<Network, FormatError> {
    format::parse_network(&format::read_file(path)?)
}

fn build_objective(scm_path: &Path, objective: Option<&Path>, benefit: Option<&Path>, path: &Path, out: Out<'_>) -> Result<(), Failure> {
    let scm = load_network(scm_path)?;
    let (obj, shift) = match (objective, benefit) {
        (Some(o), _) => {
            let raw = format::parse_objective(&scm, &format::read_file(o)?)?;
            shift_weights(&scm, &raw)?
        }
        (None, Some(r)) => {
            let (_, roles) = format::parse_roles(&scm, &format::read_file(r)?)?;
            let shift = -BENEFIT_WEIGHTS.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
            (build_benefit_instance(&scm, &roles)?, shift.max(0.0))
        }
        (None, None) => return Err(FormatError::Invalid("need --objective or --benefit".into()).into()),
    };
    let model = compose_objective(&scm, &obj)?;
    let net = &model.network;
    let scale: f64 = obj.components.iter().map(|c| c.weight).sum();
    let query = QueryDoc {
        units: format::ids_to_names(net, &model.units),
        e1: format::evidence_to(net, &model.e1),
        e2: format::evidence_to(net, &model.e2),
        scale,
        shift,
    };
    format::write_file(path, &format::network_to_json(net))?;
    let sidecar = format::sidecar_path(path);
    format::write_file(&sidecar, &format::query_to_json(&query))?;
    let _ = writeln!(
        out,
        "objective model: {} variables, {} unit(s); wrote {} and {}",
        net.len(),
        model.units.len(),
        path.display(),
        sidecar.display()
    );
    Ok(())
}

struct Query {
    net: Network,
    units: Vec<VarId>,
    e1: Evidence,
    e2: Evidence,
    scale: f64,
    shift: f64,
}

fn load_query(args: &QueryArgs) -> Result<Query, FormatError> {
    let net = load_network(&args.model)?;
    let sidecar_path = format::sidecar_path(&args.model);
    let sidecar = if sidecar_path.exists() { Some(format::parse_query(&format::read_file(&sidecar_path)?)?) } else { None };
    let need = |what: &str| FormatError::Invalid(format!("--{what} not given and no {} found", sidecar_path.display()));
    let units = match (&args.units, &sidecar) {
        (Some(s), _) => format::parse_names(s),
        (None, Some(q)) => q.units.clone(),
        (None, None) => return Err(need("units")),
    };
    let e1 = match (&args.e1, &sidecar) {
        (Some(s), _) => format::parse_assignments(s)?,
        (None, Some(q)) => q.e1.clone(),
        (None, None) => return Err(need("e1")),
    };
    let e2 = match (&args.e2, &sidecar) {
        (Some(s), _) => format::parse_assignments(s)?,
        (None, Some(q)) => q.e2.clone(),
        (None, None) => Vec::new(),
    };
    let mut units = format::names_to_ids(&net, &units)?;
    units.sort_unstable();
    units.dedup();
    let e1 = format::evidence_from(&net, &e1)?;
    let e2 = format::evidence_from(&net, &e2)?;
    let (scale, shift) = sidecar.map_or((1.0, 0.0), |q| (q.scale, q.shift));
    Ok(Query { net, units, e1, e2, scale, shift })
}

fn compile(model: &Path, units: Option<&str>, path: &Path, simplify: bool, out: Out<'_>) -> Result<(), Failure> {
    let q = load_query(&QueryArgs { model: model.to_path_buf(), units: units.map(String::from), e1: Some(String::new()), e2: None })?;
    let plan = minfill_order(&q.net, &q.units);
    let ac = Compiler::new().folding(simplify).compile_network(&q.net, &q.units, &plan)?;
    format::write_file(path, &write_dump(&ac))?;
    let _ = writeln!(out, "nodes {} edges {} width {}", ac.node_count(), ac.edge_count(), plan.width);
    write_report(&ac, &q.units, out);
    Ok(())
}

fn write_report(ac: &DecisionAC, units: &[VarId], out: Out<'_>) {
    let c = ac.certificate();
    let _ = writeln!(
        out,
        "decomposable {} smooth {} decision {} units_on_top {} indicators_attached {}",
        c.decomposable, c.smooth, c.decision, c.units_on_top, c.indicators_attached
    );
    for v in check_structure_for(ac, units) {
        let _ = writeln!(out, "violation {v:?}");
    }
    match check_u_determinism(ac, units) {
        Ok(v) if v.is_empty() => {
            let _ = writeln!(out, "u_deterministic true");
        }
        Ok(v) => {
            let _ = writeln!(out, "u_deterministic false ({} violation(s), first at node {})", v.len(), v[0].node.0);
        }
        Err(_) => {
            let _ = writeln!(out, "u_deterministic unchecked (more than {DETERMINISM_BUDGET} unit instantiations)");
        }
    }
}

fn circuit_for(q: &Query, load: Option<&Path>, stop: &dyn unitsel_core::Interrupt) -> Result<DecisionAC, Failure> {
    match load {
        Some(p) => {
            let text = format::read_file(p)?;
            let ac = read_dump(&text).map_err(|e| FormatError::Invalid(format!("{}: {e}", p.display())))?;
            let same = ac.variables().len() == q.net.len()
                && ac.variables().iter().zip(q.net.variables()).all(|(a, b)| a.name == b.name && a.cardinality == b.cardinality);
            if !same {
                return Err(FormatError::Invalid("circuit variables do not match the model".into()).into());
            }
            Ok(ac)
        }
        None => {
            let plan = minfill_order(&q.net, &q.units);
            Ok(Compiler::new().folding(true).with_interrupt(stop).compile_network(&q.net, &q.units, &plan)?)
        }
    }
}

fn run_engine(q: &Query, engine: Engine, load: Option<&Path>, stop: &dyn unitsel_core::Interrupt) -> Result<RmapResult, Failure> {
    Ok(match engine {
        Engine::Brute => brute_rmap(&q.net, &q.units, &q.e1, &q.e2, DEFAULT_BUDGET)?,
        Engine::Ve => VeSolver::new(&q.net).with_interrupt(stop).rmap(&q.units, &q.e1, &q.e2)?,
        Engine::Ac => {
            let ac = circuit_for(q, load, stop)?;
            ac_rmap_with(&ac, &q.units, &q.e1, &q.e2, stop)?
        }
    })
}

fn engine_name(e: Engine) -> &'static str {
    match e {
        Engine::Brute => "brute",
        Engine::Ve => "ve",
        Engine::Ac => "ac",
    }
}

fn argmax_text(net: &Network, u: &Evidence) -> String {
    u.iter().map(|(v, x)| format!("{}={}", net.name(v), x)).collect::<Vec<_>>().join(",")
}

fn result_json(q: &Query, r: &RmapResult) -> serde_json::Value {
    let argmax: serde_json::Map<String, serde_json::Value> = r.argmax.iter().map(|(v, x)| (q.net.name(v).to_string(), json!(x))).collect();
    json!({
        "value": r.value,
        "objective": q.scale * r.value - q.shift,
        "argmax": argmax,
        "stats": {
            "ve_size": r.stats.ve_size,
            "width": r.stats.width,
            "peak_scope": r.stats.peak_scope,
            "ops": r.stats.ops,
            "subnormals": r.stats.subnormals,
            "seconds": r.stats.elapsed.as_secs_f64(),
        },
    })
}

fn solve(args: &QueryArgs, engine: Engine, load: Option<&Path>, timeout: Option<f64>, fmt: OutputFormat, out: Out<'_>) -> Result<(), Failure> {
    let q = load_query(args)?;
    if load.is_some() && engine != Engine::Ac {
        return Err(FormatError::Invalid("--load-circuit needs --engine ac".into()).into());
    }
    let start = Instant::now();
    let deadline = match timeout {
        Some(t) if t.is_finite() && t >= 0.0 => Some(start + Duration::from_secs_f64(t)),
        Some(_) => return Err(FormatError::Invalid("timeout must be a non-negative number of seconds".into()).into()),
        None => None,
    };
    let stop = || deadline.is_some_and(|d| Instant::now() >= d);
    let mut r = run_engine(&q, engine, load, &stop)?;
    r.stats.elapsed = start.elapsed();
    match fmt {
        OutputFormat::Json => {
            let _ = writeln!(out, "{}", result_json(&q, &r));
        }
        OutputFormat::Text => {
            let _ = writeln!(out, "engine {}", engine_name(engine));
            let _ = writeln!(out, "value {:.17e}", r.value);
            let _ = writeln!(out, "objective {:.17e}", q.scale * r.value - q.shift);
            let _ = writeln!(out, "argmax {}", argmax_text(&q.net, &r.argmax));
            let s = &r.stats;
            let _ = writeln!(
                out,
                "stats ve_size {} width {} peak_scope {} ops {} subnormals {} seconds {:.3}",
                s.ve_size,
                s.width,
                s.peak_scope,
                s.ops,
                s.subnormals,
                s.elapsed.as_secs_f64()
            );
        }
    }
    Ok(())
}

fn verify(args: &QueryArgs, load: Option<&Path>, fmt: OutputFormat, out: Out<'_>) -> Result<(), Failure> {
    let q = load_query(args)?;
    let never = || false;
    let mut done: Vec<(Engine, RmapResult)> = Vec::new();
    let mut skipped: Vec<(Engine, String)> = Vec::new();
    for engine in [Engine::Brute, Engine::Ve, Engine::Ac] {
        let load = if engine == Engine::Ac { load } else { None };
        match run_engine(&q, engine, load, &never) {
            Ok(r) => done.push((engine, r)),
            Err(Failure::Core(e)) if is_engine_failure(&e) => skipped.push((engine, e.to_string())),
            Err(f) => return Err(f),
        }
    }
    let agree = done.iter().all(|(_, r)| harness::values_agree(r.value, done[0].1.value));
    match fmt {
        OutputFormat::Json => {
            let engines: serde_json::Map<String, serde_json::Value> =
                done.iter().map(|(e, r)| (engine_name(*e).to_string(), result_json(&q, r))).collect();
            let skipped: serde_json::Map<String, serde_json::Value> =
                skipped.iter().map(|(e, m)| (engine_name(*e).to_string(), json!(m))).collect();
            let mut doc = done.first().map_or_else(|| json!({}), |(_, r)| result_json(&q, r));
            doc["agree"] = json!(agree);
            doc["engines"] = json!(engines);
            doc["skipped"] = json!(skipped);
            let _ = writeln!(out, "{doc}");
        }
        OutputFormat::Text => {
            for (e, r) in &done {
                let _ = writeln!(out, "{:<5} value {:.17e} argmax {}", engine_name(*e), r.value, argmax_text(&q.net, &r.argmax));
            }
            for (e, m) in &skipped {
                let _ = writeln!(out, "{:<5} skipped: {m}", engine_name(*e));
            }
            let _ = writeln!(out, "{}", if agree { "agree" } else { "DISAGREE" });
        }
    }
    if done.len() < 2 {
        return Err(Failure::Core(Error::BudgetExceeded { limit: DEFAULT_BUDGET }));
    }
    if !agree {
        let detail = done.iter().map(|(e, r)| format!("{} = {:.17e}", engine_name(*e), r.value)).collect::<Vec<_>>().join(", ");
        return Err(Failure::Disagreement(detail));
    }
    Ok(())
}
