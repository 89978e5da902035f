use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mrfprep::bounds::{expansion_beta, per_instance_additive};
use mrfprep::harness::{read_instance, run_suite, write_instance, write_report, write_trace_csv, GeneratorSpec, Manifest};
use mrfprep::inference::{solve, InferenceReport, Method, SolveConfig};
use mrfprep::marginals::QMode;
use mrfprep::oracle::Oracle;
use mrfprep::preprocess::{run_preprocess, CheckMode, PreprocessConfig};
use mrfprep::{EnergyFunction, PartialLabeling};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "mrfprep", version, about = "Pairwise MRF pre-processing and inference")]
struct Cli {
    /// Strictness tolerance for "> 0" comparisons.
    #[arg(long, global = true, env = "MRF_TOL", default_value_t = mrfprep::DEFAULT_TOL)]
    tol: f64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen(GenArgs),
    /// Minimize an instance with one of the methods.
    Solve(SolveArgs),
    /// Run pre-processing alone and print the fixed variables.
    Preprocess(PreprocessArgs),
    /// Brute-force minimizers, and optionally test a partial labeling.
    Oracle(OracleArgs),
    /// Run a benchmark manifest and write records, summaries and traces.
    Bench(BenchArgs),
    /// Check pre-processing on a small instance against the oracle.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// grid-potts | denoise-trunc-l2 | random-binary | random-nonsubmodular | random-multilabel
    kind: String,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    labels: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    trunc: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    edge_prob: Option<f64>,
    #[arg(long)]
    submodular: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct PreArgs {
    #[arg(long, default_value_t = 0.8, allow_negative_numbers = true)]
    kappa: f64,
    #[arg(long, default_value_t = 3)]
    tau: usize,
    /// Loss gate per fixed variable, a number or `inf`.
    #[arg(long, default_value = "inf", value_parser = parse_eps, allow_negative_numbers = true)]
    eps: f64,
    /// uniform | unary | lbp:K
    #[arg(long = "q", default_value = "unary", value_parser = parse_q)]
    q: QMode,
    /// exact | approx
    #[arg(long, default_value = "approx", value_parser = parse_check)]
    check: CheckMode,
}

impl PreArgs {
    fn config(&self, tol: f64) -> PreprocessConfig {
        PreprocessConfig {
            kappa: self.kappa,
            tau: self.tau,
            epsilon: self.eps,
            q_mode: self.q,
            check_mode: self.check,
            tol,
            only_label: None,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    /// expansion | expansion-pre | multilabel-pre | pre-exact | bruteforce
    #[arg(long, default_value = "expansion", value_parser = parse_method)]
    method: Method,
    #[arg(long, default_value_t = 5)]
    max_epochs: usize,
    /// Write the energy-vs-time trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    reject_uphill: bool,
    #[arg(long)]
    keep_label_only_after_epoch1: bool,
    /// Compare every move's fixes with the move's optimum (expansion-pre).
    #[arg(long)]
    audit: bool,
    /// Enumeration cap for the exhaustive methods.
    #[arg(long, default_value_t = 1 << 24)]
    cap: u128,
    /// Write the full report (including the labeling) as JSON.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    pre: PreArgs,
}

#[derive(Args)]
struct PreprocessArgs {
    instance: PathBuf,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[command(flatten)]
    pre: PreArgs,
}

#[derive(Args)]
struct OracleArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 1 << 24)]
    cap: u128,
    /// Partial labeling to test, as `node=label` pairs separated by commas.
    #[arg(long, value_parser = parse_partial)]
    fixed: Option<PartialLabeling>,
    /// Print at most this many minimizers.
    #[arg(long, default_value_t = 10)]
    max_minimizers: usize,
}

#[derive(Args)]
struct BenchArgs {
    manifest: PathBuf,
    /// Directory for records.csv, records.json, summary.json and traces/.
    #[arg(long, short)]
    out: PathBuf,
    /// Override the manifest's parallel flag.
    #[arg(long)]
    parallel: Option<bool>,
}

#[derive(Args)]
struct VerifyArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 1 << 24)]
    cap: u128,
    #[command(flatten)]
    pre: PreArgs,
}

fn parse_eps(s: &str) -> Result<f64, String> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| e.to_string()),
    }
}

fn parse_q(s: &str) -> Result<QMode, String> {
    s.parse().map_err(|e: mrfprep::Error| e.to_string())
}

fn parse_check(s: &str) -> Result<CheckMode, String> {
    s.parse().map_err(|e: mrfprep::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: mrfprep::Error| e.to_string())
}

fn parse_partial(s: &str) -> Result<PartialLabeling, String> {
    let mut out = PartialLabeling::new();
    for pair in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (i, l) = pair.split_once('=').ok_or_else(|| format!("expected node=label, got '{pair}'"))?;
        let i: usize = i.trim().parse().map_err(|_| format!("bad node in '{pair}'"))?;
        let l: usize = l.trim().parse().map_err(|_| format!("bad label in '{pair}'"))?;
        if out.insert(i, l).is_some() {
            return Err(format!("node {i} is assigned twice"));
        }
    }
    Ok(out)
}

enum Failure {
    Lib(mrfprep::Error),
    Usage(String),
    Context(&'static str, String),
    Verify(Value),
}

impl From<mrfprep::Error> for Failure {
    fn from(e: mrfprep::Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CliResult = Result<(), Failure>;

fn print_json(v: &impl serde::Serialize) -> CliResult {
    print_text(&serde_json::to_string_pretty(v)?)
}

/// Writes to stdout; a closed pipe (as with `| head`) is not an error.
fn print_text(text: &str) -> CliResult {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load(path: &Path) -> Result<EnergyFunction, Failure> {
    read_instance(path).map_err(|e| match e {
        mrfprep::Error::Io(io) => Failure::Context("io", format!("{}: {io}", path.display())),
        other => Failure::Lib(other),
    })
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> CliResult {
    fs::write(path, serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn gen(args: &GenArgs) -> CliResult {
    let mut m = Map::new();
    m.insert("kind".into(), json!(args.kind));
    let fields: [(&str, Option<Value>); 9] = [
        ("width", args.width.map(Value::from)),
        ("height", args.height.map(Value::from)),
        ("labels", args.labels.map(Value::from)),
        ("lambda", args.lambda.map(Value::from)),
        ("trunc", args.trunc.map(Value::from)),
        ("noise", args.noise.map(Value::from)),
        ("jitter", args.jitter.map(Value::from)),
        ("nodes", args.nodes.map(Value::from)),
        ("edge_prob", args.edge_prob.map(Value::from)),
    ];
    for (k, v) in fields {
        if let Some(v) = v {
            m.insert(k.into(), v);
        }
    }
    if args.kind == "random-binary" {
        m.insert("submodular".into(), json!(args.submodular));
    }
    let spec: GeneratorSpec =
        serde_json::from_value(Value::Object(m)).map_err(|e| Failure::Usage(format!("generator parameters: {e}")))?;
    let e = mrfprep::harness::generate(&spec, args.seed)?;
    match &args.out {
        Some(path) => write_instance(path, &e)?,
        None => print_text(&mrfprep::harness::energy_to_json(&e))?,
    }
    Ok(())
}

fn summary(r: &InferenceReport) -> Value {
    json!({
        "method": r.method,
        "energy": r.energy,
        "epochs": r.epochs,
        "wall_time_s": r.wall_time_s,
        "labeled_fraction": r.labeled_fraction,
        "precision": r.precision,
        "recall": r.recall,
        "fixed": r.preprocess.as_ref().map(|p| p.num_fixed()),
        "certificates": r.certificates.iter().map(|c| json!({"kind": c.kind, "statement": c.to_string()})).collect::<Vec<_>>(),
    })
}

fn solve_cmd(args: &SolveArgs, tol: f64) -> CliResult {
    let e = load(&args.instance)?;
    let config = SolveConfig {
        method: args.method,
        pre: args.pre.config(tol),
        max_epochs: args.max_epochs,
        reject_uphill: args.reject_uphill,
        keep_label_only_after_epoch1: args.keep_label_only_after_epoch1,
        audit: args.audit,
        tol,
        oracle_cap: args.cap,
    };
    let r = solve(&e, &config)?;
    if let Some(path) = &args.trace {
        write_trace_csv(path, &r.trace)?;
    }
    if let Some(path) = &args.out {
        write_json(path, &r)?;
    }
    print_json(&summary(&r))
}

fn preprocess_cmd(args: &PreprocessArgs, tol: f64) -> CliResult {
    let e = load(&args.instance)?;
    let r = run_preprocess(&e, &args.pre.config(tol))?;
    let out = json!({
        "nodes": e.num_nodes(),
        "num_fixed": r.num_fixed(),
        "additive_slack": r.additive_slack(),
        "certificate": per_instance_additive(&r, 0.0).to_string(),
        "result": r,
    });
    if let Some(path) = &args.out {
        write_json(path, &out)?;
    }
    print_json(&out)
}

fn oracle_cmd(args: &OracleArgs, tol: f64) -> CliResult {
    let e = load(&args.instance)?;
    let oracle = Oracle::new(args.cap, tol);
    let set = oracle.brute_force_minimize(&e)?;
    let mut out = json!({
        "min_energy": set.min_energy,
        "num_minimizers": set.minimizers.len(),
        "minimizers": set.minimizers.iter().take(args.max_minimizers).collect::<Vec<_>>(),
    });
    if let Some(fixed) = &args.fixed {
        fixed.validate(&e)?;
        out["fixed"] = json!({
            "persistent": Oracle::persistent_in(&set, fixed),
            "autarky": oracle.is_autarky(&e, fixed)?,
        });
    }
    print_json(&out)
}

fn bench_cmd(args: &BenchArgs) -> CliResult {
    let mut manifest = Manifest::from_path(&args.manifest).map_err(|e| match e {
        mrfprep::Error::Io(io) => Failure::Context("io", format!("{}: {io}", args.manifest.display())),
        other => Failure::Lib(other),
    })?;
    if let Some(p) = args.parallel {
        manifest.parallel = p;
    }
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let report = run_suite(&manifest, base, None)?;
    write_report(&report, &args.out)?;
    let failed: Vec<Value> = report
        .records
        .iter()
        .filter(|r| !r.is_ok())
        .map(|r| json!({"instance": r.instance_id, "method": r.method_id, "error": r.error}))
        .collect();
    print_json(&json!({"records": report.records.len(), "failed": failed, "summaries": report.summaries}))
}

/// Fixes must form an autarky when they are claimed sound (κ = 1 with the
/// exact check), and the exact-remainder solution must meet its certificate.
fn verify_cmd(args: &VerifyArgs, tol: f64) -> CliResult {
    let e: EnergyFunction = load(&args.instance)?;
    let config = args.pre.config(tol);
    let oracle = Oracle::new(args.cap, tol);
    let optimum = oracle.brute_force_minimize(&e)?;
    let r = run_preprocess(&e, &config)?;
    let persistent = Oracle::persistent_in(&optimum, &r.fixed);
    let autarky = oracle.is_autarky(&e, &r.fixed)?;
    let sound_claimed = config.kappa >= 1.0 && config.check_mode == CheckMode::Exact;

    let cond = e.condition(&r.fixed)?;
    let rest = oracle.brute_force_minimize(&cond.energy)?;
    let achieved = e.energy(&cond.complete(&rest.minimizers[0]));
    let cert = per_instance_additive(&r, 0.0);
    let bound_holds = cert.check(achieved, optimum.min_energy, tol);
    let beta = expansion_beta(&e, tol).ok();

    let ok = bound_holds && (!sound_claimed || (persistent && autarky));
    let out = json!({
        "ok": ok,
        "num_fixed": r.num_fixed(),
        "persistent": persistent,
        "autarky": autarky,
        "sound_claimed": sound_claimed,
        "optimum": optimum.min_energy,
        "achieved_with_exact_remainder": achieved,
        "certificate": cert.to_string(),
        "certificate_holds": bound_holds,
        "expansion_beta": beta,
    });
    print_json(&out)?;
    if ok {
        Ok(())
    } else {
        Err(Failure::Verify(out))
    }
}

fn run(cli: &Cli) -> CliResult {
    if !(cli.tol.is_finite() && cli.tol >= 0.0) {
        return Err(Failure::Usage(format!("tolerance must be finite and >= 0, got {}", cli.tol)));
    }
    match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Solve(a) => solve_cmd(a, cli.tol),
        Command::Preprocess(a) => preprocess_cmd(a, cli.tol),
        Command::Oracle(a) => oracle_cmd(a, cli.tol),
        Command::Bench(a) => bench_cmd(a),
        Command::Verify(a) => verify_cmd(a, cli.tol),
    }
}

fn report_error(kind: &str, message: String, detail: Option<Value>) {
    let mut v = json!({"error": kind, "message": message});
    if let Some(d) = detail {
        v["detail"] = d;
    }
    eprintln!("{v}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim().to_string(), None);
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            report_error(e.kind(), e.to_string(), None);
            ExitCode::from(1)
        }
        Err(Failure::Context(kind, m)) => {
            report_error(kind, m, None);
            ExitCode::from(1)
        }
        Err(Failure::Usage(m)) => {
            report_error("usage", m, None);
            ExitCode::from(2)
        }
        Err(Failure::Verify(detail)) => {
            report_error("verification_failed", "pre-processing did not meet its guarantees".into(), Some(detail));
            ExitCode::from(3)
        }
    }
}
