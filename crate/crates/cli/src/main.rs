//! `robust-ea`: runs, sweeps, oracles, drift checks and the acceptance
//! suite from the command line.
//!
//! Results go to stdout in CSV (or JSON lines where offered); diagnostics
//! go to stderr. Exit status: 0 on success, 1 on usage errors and
//! violated preconditions, 2 when a verification fails.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use evalexpr::{ContextWithMutableVariables, HashMapContext, Value};

use robust_ea::bitvec::{BitString, RNG_ALGORITHM};
use robust_ea::drift::{check_bound, ladder_states, states_with_ones, BoundKind, DistanceFunction};
use robust_ea::experiments::{
    run_trials, sweep, to_csv, to_jsonl, SweepSpec, DEFAULT_MAX_EVALUATIONS,
};
use robust_ea::oracle::{
    brute_force_f, brute_force_optimum, full_chain_efht, lumped_chain_efht, InitialDistribution,
    LumpedKind, Precision, MAX_BRUTE_N,
};
use robust_ea::problems::{format_rational, Family, Instance, InstanceFile};
use robust_ea::verify::{run_criterion, Mode, CRITERIA};

/// Writes to stdout; a closed pipe (e.g. `| head`) ends the process quietly.
fn emit(text: &str) {
    use std::io::Write;
    if let Err(e) = std::io::stdout().lock().write_all(text.as_bytes()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write output: {e}");
        std::process::exit(1);
    }
}

macro_rules! out {
    ($($t:tt)*) => { emit(&format!($($t)*)) };
}

macro_rules! outln {
    ($($t:tt)*) => { emit(&format!("{}\n", format_args!($($t)*))) };
}

/// Environment variable holding the default worker count.
const WORKERS_ENV: &str = "ROBUST_EA_WORKERS";

#[derive(Parser)]
#[command(
    name = "robust-ea",
    version,
    about = "(1+1)-EA experiments on robust linear optimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the (1+1)-EA on an instance and print trial statistics.
    Run(RunArgs),
    /// Run a parameter sweep from a TOML spec and write CSV.
    Sweep(SweepArgs),
    /// Exact expected hitting time from the Markov-chain oracle.
    OracleEfht(EfhtArgs),
    /// Brute-force objective and optimum checks.
    OracleBrute(BruteArgs),
    /// Monte Carlo drift check of a distance function.
    Drift(DriftArgs),
    /// Run the acceptance checks.
    Verify(VerifyArgs),
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse::<Family>().map_err(|e| e.to_string())
}

/// An instance from a file or from builder shorthand flags.
#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["instance", "family"])))]
struct InstanceArgs {
    /// Instance file (TOML).
    #[arg(long, value_name = "FILE")]
    instance: Option<PathBuf>,
    /// Builder family, expanded to the instance-file schema with --n/--k/--d/--m.
    #[arg(long, value_parser = parse_family, conflicts_with = "instance")]
    family: Option<Family>,
    #[arg(long, requires = "family")]
    n: Option<usize>,
    #[arg(long, requires = "family")]
    k: Option<usize>,
    #[arg(long, requires = "family")]
    d: Option<usize>,
    #[arg(long, requires = "family")]
    m: Option<usize>,
}

impl InstanceArgs {
    fn file(&self) -> Result<InstanceFile> {
        match (&self.instance, self.family) {
            (Some(path), _) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("cannot read {}", path.display()))?;
                InstanceFile::from_toml(&text).with_context(|| format!("in {}", path.display()))
            }
            (None, Some(family)) => {
                let n = self.n.ok_or_else(|| anyhow!("--family requires --n"))?;
                Ok(InstanceFile::builder(family, n, self.k, self.d, self.m))
            }
            (None, None) => bail!("give --instance FILE or --family NAME"),
        }
    }

    fn load(&self) -> Result<Instance> {
        Ok(self.file()?.build()?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Master seed; trial t runs with derive_seed(seed, 0, t).
    #[arg(long)]
    seed: u64,
    #[arg(long = "max-evals", default_value_t = DEFAULT_MAX_EVALUATIONS)]
    max_evals: u64,
    #[arg(long, default_value_t = 1)]
    trials: u64,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Output CSV file, or `-` for stdout.
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
    /// Also write the records as JSON lines.
    #[arg(long, value_name = "FILE")]
    jsonl: Option<PathBuf>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ChainKind {
    DeletionOnemax,
    AcceptAll,
}

#[derive(Args)]
struct EfhtArgs {
    #[arg(long, value_enum)]
    kind: ChainKind,
    #[arg(long)]
    n: usize,
    /// Cardinality bound; required for deletion-onemax.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    d: usize,
    /// Solve on all 2^n strings instead of the one-count chain.
    #[arg(long)]
    full: bool,
    /// Exact rational solve of the one-count chain (small n).
    #[arg(long, conflicts_with = "full")]
    exact: bool,
    /// Start from this one-count (or string index with --full) instead of
    /// a uniformly random string.
    #[arg(long)]
    start: Option<usize>,
    /// Print the per-state table instead of the summary.
    #[arg(long)]
    table: bool,
}

#[derive(Args)]
#[command(group(ArgGroup::new("what").required(true).args(["optimum", "check_f", "x"])))]
struct BruteArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// Exhaustive optimum compared with the stored optimum.
    #[arg(long)]
    optimum: bool,
    /// Closed-form F against the enumeration of deletions on every string.
    #[arg(long = "check-F", alias = "check-f")]
    check_f: bool,
    /// Evaluate F on one string by enumeration.
    #[arg(long, value_name = "BITS")]
    x: Option<String>,
}

#[derive(Args)]
struct DriftArgs {
    /// Distance family: lemma1_piecewise, lemma1_linear, onemax_phase2,
    /// binval_phase2a, binval_phase2b, general_deletion.
    #[arg(long)]
    family: String,
    /// Comma-separated parameters, e.g. `n=50,k=30,d=10` (`r` for
    /// lemma1_piecewise).
    #[arg(long, default_value = "")]
    params: String,
    /// Deletion-robust instance for general_deletion.
    #[arg(long, value_name = "FILE")]
    instance: Option<PathBuf>,
    /// `ladder:A..B` (one string 1^j 0^(n-j) per j in A..=B), `all:A..B`
    /// (every string with A..=B ones) or `bits:0101,0011`.
    #[arg(long)]
    states: String,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// `additive:EXPR` or `multiplicative:EXPR`, EXPR over n, k, d, r, e.
    /// Defaults exist for onemax_phase2, lemma1_piecewise and
    /// general_deletion.
    #[arg(long)]
    bound: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Smaller sizes for a fast smoke run.
    #[arg(long)]
    quick: bool,
    /// Run only these criteria.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=10))]
    criterion: Vec<u8>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(0) => bail!("--workers must be at least 1"),
        Some(w) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .context("cannot start the worker pool")?
            .install(f)),
        None => Ok(f()),
    }
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let inst = args.instance.load()?;
    let stats = with_pool(args.workers, || {
        run_trials(&inst, args.trials, args.seed, args.max_evals)
    })??;
    eprintln!(
        "{} trials of {} (n={}), {} censored; rng {RNG_ALGORITHM}",
        stats.trials, stats.family, stats.n, stats.censored
    );
    let rows = [stats];
    out!(
        "{}",
        match args.format {
            Format::Csv => to_csv(&rows),
            Format::Jsonl => to_jsonl(&rows),
        }
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode> {
    let text = fs::read_to_string(&args.spec)
        .with_context(|| format!("cannot read {}", args.spec.display()))?;
    let spec = SweepSpec::from_toml(&text)?;
    let out = sweep(&spec, args.workers)?;
    for s in &out.skipped {
        eprintln!(
            "skipped cell n={} k={:?} d={:?} r={:?} m={:?}: {}",
            s.cell.n, s.cell.k, s.cell.d, s.cell.r, s.cell.m, s.reason
        );
    }
    let csv = to_csv(&out.rows);
    if args.out.as_os_str() == "-" {
        out!("{csv}");
    } else {
        fs::write(&args.out, csv)
            .with_context(|| format!("cannot write {}", args.out.display()))?;
    }
    if let Some(path) = &args.jsonl {
        fs::write(path, to_jsonl(&out.rows))
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    eprintln!(
        "{} cells run, {} skipped",
        out.rows.len(),
        out.skipped.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_efht(args: &EfhtArgs) -> Result<ExitCode> {
    let (kind, k) = match args.kind {
        ChainKind::DeletionOnemax => (
            LumpedKind::DeletionOneMax,
            args.k
                .ok_or_else(|| anyhow!("--kind deletion-onemax requires --k"))?,
        ),
        ChainKind::AcceptAll => {
            if args.k.is_some() {
                bail!("--k is not used by --kind accept-all");
            }
            (LumpedKind::AcceptAllWalk, args.n)
        }
    };
    let init = args
        .start
        .map_or(InitialDistribution::Uniform, InitialDistribution::Point);
    let sol = if args.full {
        if args.kind != ChainKind::DeletionOnemax {
            bail!("--full supports --kind deletion-onemax only (the walk's one-count chain is already exact)");
        }
        let inst: Instance =
            InstanceFile::builder(Family::OneMax, args.n, Some(k), Some(args.d), None).build()?;
        full_chain_efht(&inst, init)?
    } else {
        let precision = if args.exact {
            Precision::Exact
        } else {
            Precision::Float
        };
        lumped_chain_efht(kind, args.n, k, args.d, init, precision)?
    };
    if args.table {
        out!("{}", sol.to_csv());
        return Ok(ExitCode::SUCCESS);
    }
    let kind_name = match args.kind {
        ChainKind::DeletionOnemax => "deletion-onemax",
        ChainKind::AcceptAll => "accept-all",
    };
    outln!("kind,n,k,d,states,mean_evaluations,exact_mean_evaluations,residual");
    outln!(
        "{kind_name},{},{},{},{},{},{},{:e}",
        args.n,
        args.k.map(|k| k.to_string()).unwrap_or_default(),
        args.d,
        if args.full { "full" } else { "ones" },
        sol.mean_evaluations,
        sol.exact_mean_evaluations
            .as_ref()
            .map(format_rational)
            .unwrap_or_default(),
        sol.residual
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_brute(args: &BruteArgs) -> Result<ExitCode> {
    let inst = args.instance.load()?;
    if args.optimum {
        let found = brute_force_optimum(&inst)?;
        let stored = inst.optimum_value().cloned();
        let agree = stored.as_ref().map(|s| *s == found);
        outln!("family,n,k,brute_optimum,stored_optimum,agree");
        outln!(
            "{},{},{},{},{},{}",
            inst.family(),
            inst.n(),
            inst.k(),
            found,
            stored.map(|s| s.to_string()).unwrap_or_default(),
            agree.map(|a| a.to_string()).unwrap_or_default()
        );
        return Ok(if agree == Some(false) {
            ExitCode::from(2)
        } else {
            ExitCode::SUCCESS
        });
    }
    let Instance::Deletion(del) = &inst else {
        bail!(
            "F enumeration applies to deletion-robust instances only, got {}",
            inst.family()
        );
    };
    if let Some(bits) = &args.x {
        let x: BitString = bits
            .parse()
            .with_context(|| format!("bad string {bits:?}"))?;
        let brute = brute_force_f(del, &x)?;
        let closed = del.eval_f(&x)?;
        outln!("x,brute_f,closed_form_f,agree");
        outln!("{x},{brute},{closed},{}", brute == closed);
        return Ok(if brute == closed {
            ExitCode::SUCCESS
        } else {
            ExitCode::from(2)
        });
    }
    let n = del.n();
    if n > MAX_BRUTE_N {
        bail!("--check-F enumerates all strings and requires n <= {MAX_BRUTE_N}, got {n}");
    }
    let mut mismatches = 0u64;
    for code in 0..1u64 << n {
        let x = BitString::from_index(n, code)?;
        if brute_force_f(del, &x)? != del.eval_f(&x)? {
            mismatches += 1;
            eprintln!("mismatch at {x}");
        }
    }
    outln!("family,n,k,d,strings,mismatches");
    outln!(
        "{},{n},{},{},{},{mismatches}",
        del.family(),
        del.k(),
        del.d(),
        1u64 << n
    );
    Ok(if mismatches == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn parse_params(text: &str) -> Result<Vec<(String, usize)>> {
    text.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (name, value) = p
                .split_once('=')
                .ok_or_else(|| anyhow!("parameter {p:?} is not NAME=VALUE"))?;
            let value = value
                .trim()
                .parse::<usize>()
                .with_context(|| format!("parameter {name} must be a non-negative integer"))?;
            Ok((name.trim().to_string(), value))
        })
        .collect()
}

fn parse_range(text: &str) -> Result<std::ops::RangeInclusive<usize>> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| anyhow!("range {text:?} is not A..B"))?;
    let a: usize = a
        .trim()
        .parse()
        .with_context(|| format!("bad range start in {text:?}"))?;
    let b: usize = b
        .trim()
        .trim_start_matches('=')
        .parse()
        .with_context(|| format!("bad range end in {text:?}"))?;
    if a > b {
        bail!("empty range {text:?}");
    }
    Ok(a..=b)
}

fn build_distance(args: &DriftArgs, params: &[(String, usize)]) -> Result<DistanceFunction> {
    let allowed: &[&str] = match args.family.as_str() {
        "lemma1_piecewise" => &["n", "r"],
        "lemma1_linear" => &["n", "d"],
        "onemax_phase2" | "binval_phase2a" | "binval_phase2b" => &["n", "k", "d"],
        "general_deletion" => &[],
        other => bail!(
            "unknown distance family {other:?}; expected one of {}",
            DistanceFunction::NAMES.join(", ")
        ),
    };
    for (name, _) in params {
        if !allowed.contains(&name.as_str()) {
            bail!("{} does not take parameter {name}", args.family);
        }
    }
    let get = |name: &str| {
        params
            .iter()
            .find(|(p, _)| p == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| anyhow!("{} requires parameter {name}", args.family))
    };
    if args.instance.is_some() != (args.family == "general_deletion") {
        bail!("--instance is required by general_deletion and used by no other family");
    }
    Ok(match args.family.as_str() {
        "lemma1_piecewise" => DistanceFunction::lemma1_piecewise(get("n")?, get("r")?)?,
        "lemma1_linear" => DistanceFunction::lemma1_linear(get("n")?, get("d")?)?,
        "onemax_phase2" => DistanceFunction::onemax_phase2(get("n")?, get("k")?, get("d")?)?,
        "binval_phase2a" => DistanceFunction::binval_phase2a(get("n")?, get("k")?, get("d")?)?,
        "binval_phase2b" => DistanceFunction::binval_phase2b(get("n")?, get("k")?, get("d")?)?,
        _ => {
            let path = args.instance.as_ref().expect("checked above");
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            match InstanceFile::from_toml(&text)?.build()? {
                Instance::Deletion(del) => DistanceFunction::general_deletion(del),
                Instance::Worst(_) => bail!("general_deletion requires a deletion-robust instance"),
            }
        }
    })
}

fn parse_bound(spec: &str, dist: &DistanceFunction) -> Result<BoundKind> {
    let (kind, expr) = spec
        .split_once(':')
        .ok_or_else(|| anyhow!("bound {spec:?} is not additive:EXPR or multiplicative:EXPR"))?;
    let mut ctx = HashMapContext::<evalexpr::DefaultNumericTypes>::new();
    let k = dist.instance().map_or(0, |i| i.k());
    let r = match dist {
        DistanceFunction::Lemma1Piecewise { r, .. } => *r,
        _ => 0,
    };
    for (name, v) in [
        ("n", dist.n() as f64),
        ("k", k as f64),
        ("d", dist.d() as f64),
        ("r", r as f64),
        ("e", std::f64::consts::E),
    ] {
        ctx.set_value(name.into(), Value::from_float(v))
            .expect("fresh variable");
    }
    let c: f64 = evalexpr::eval_number_with_context(expr, &ctx)
        .with_context(|| format!("cannot evaluate bound {expr:?}"))?;
    if !(c.is_finite() && c > 0.0) {
        bail!("bound constant must be positive and finite, got {c}");
    }
    match kind {
        "additive" => Ok(BoundKind::Additive(c)),
        "multiplicative" => Ok(BoundKind::Multiplicative(c)),
        other => bail!("unknown bound kind {other:?}; expected additive or multiplicative"),
    }
}

fn cmd_drift(args: &DriftArgs) -> Result<ExitCode> {
    let params = parse_params(&args.params)?;
    let dist = build_distance(args, &params)?;
    let n = dist.n();
    let states = match args.states.split_once(':') {
        Some(("ladder", range)) => ladder_states(n, parse_range(range)?),
        Some(("all", range)) => states_with_ones(n, parse_range(range)?)?,
        Some(("bits", list)) => list
            .split(',')
            .map(|b| {
                b.trim()
                    .parse::<BitString>()
                    .with_context(|| format!("bad string {b:?}"))
            })
            .collect::<Result<Vec<_>>>()?,
        _ => bail!("--states must be ladder:A..B, all:A..B or bits:LIST"),
    };
    let default_bound = match dist.name() {
        "onemax_phase2" => Some("multiplicative:1/(e*n)"),
        "lemma1_piecewise" => Some("additive:1/n^2"),
        "general_deletion" => Some("multiplicative:1/(e*n^(2*d+2))"),
        _ => None,
    };
    let bound_text = match (&args.bound, default_bound) {
        (Some(b), _) => b.as_str(),
        (None, Some(b)) => b,
        (None, None) => bail!("{} has no default bound; pass --bound", dist.name()),
    };
    let kind = parse_bound(bound_text, &dist)?;
    let report = with_pool(args.workers, || {
        check_bound(&dist, &states, kind, args.samples, args.seed)
    })??;
    out!("{}", report.to_csv());
    eprintln!(
        "{}: {}/{} states pass {bound_text} at {} samples each; implied bound {:.4e}",
        report.family,
        report.states.len() - report.flagged(),
        report.states.len(),
        args.samples,
        report.implied_bound
    );
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_verify(args: &VerifyArgs) -> Result<ExitCode> {
    let mode = if args.quick { Mode::Quick } else { Mode::Full };
    let ids: Vec<u8> = if args.criterion.is_empty() {
        CRITERIA.iter().map(|c| c.0).collect()
    } else {
        args.criterion.clone()
    };
    let mut all_passed = true;
    for id in ids {
        let result = with_pool(args.workers, || run_criterion(id, mode))?;
        all_passed &= result.passed;
        outln!("{result}");
    }
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                out!("{e}");
                return ExitCode::SUCCESS;
            }
            let rendered = e.to_string();
            // Keep the diagnostic on one line; drop clap's usage block.
            let message: Vec<&str> = rendered
                .lines()
                .take_while(|l| !l.starts_with("Usage:"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("{} (see --help)", message.join(" "));
            return ExitCode::from(1);
        }
    };
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::OracleEfht(a) => cmd_efht(a),
        Command::OracleBrute(a) => cmd_brute(a),
        Command::Drift(a) => cmd_drift(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
