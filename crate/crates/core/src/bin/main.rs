use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;
use sha2::{Digest, Sha256};

use gammareg::config::{ExperimentConfig, SUITES};
use gammareg::suites::{criteria, run_suite, SuiteReport};
use gammareg::Error;

#[derive(Parser)]
#[command(name = "gammareg", version, about = "Maximal regularity experiments at matrix scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args, Clone)]
struct Opts {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed; suites without their own seed derive theirs from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads. Output does not depend on this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory for CSVs and the manifest.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Treat warnings as failures.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand, Clone)]
enum Command {
    GammaNorm { #[arg(value_name = "CONFIG")] file: Option<PathBuf> },
    Sectorial { #[arg(value_name = "CONFIG")] file: Option<PathBuf> },
    Maxreg { #[arg(value_name = "CONFIG")] file: Option<PathBuf> },
    Stochastic { #[arg(value_name = "CONFIG")] file: Option<PathBuf> },
    SolveSee { #[arg(value_name = "CONFIG")] file: Option<PathBuf> },
    Heat { #[arg(value_name = "CONFIG")] file: Option<PathBuf> },
    Tables { #[arg(value_name = "CONFIG")] file: Option<PathBuf> },
    All { #[arg(value_name = "CONFIG")] file: Option<PathBuf> },
}

impl Command {
    fn split(&self) -> (&'static str, Option<&PathBuf>) {
        match self {
            Command::GammaNorm { file } => ("gamma-norm", file.as_ref()),
            Command::Sectorial { file } => ("sectorial", file.as_ref()),
            Command::Maxreg { file } => ("maxreg", file.as_ref()),
            Command::Stochastic { file } => ("stochastic", file.as_ref()),
            Command::SolveSee { file } => ("solve-see", file.as_ref()),
            Command::Heat { file } => ("heat", file.as_ref()),
            Command::Tables { file } => ("tables", file.as_ref()),
            Command::All { file } => ("all", file.as_ref()),
        }
    }
}

enum Failure {
    Usage(String),
    Assertion(String),
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sha256(text: &str) -> String {
    hex(&Sha256::digest(text.as_bytes()))
}

fn load(path: Option<&PathBuf>) -> Result<ExperimentConfig, Failure> {
    let Some(path) = path else { return Ok(ExperimentConfig::default()) };
    let text = fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    ExperimentConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, text: &str, artifacts: &mut Vec<serde_json::Value>) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    artifacts.push(json!({ "file": name, "sha256": sha256(text) }));
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let (suite, positional) = cli.command.split();
    let opts = cli.opts;
    let mut cfg = load(opts.config.as_ref().or(positional))?;
    if let Some(s) = opts.seed {
        cfg.seed = s;
    }
    let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    let out = opts.out.clone().or(cfg.out.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    if opts.jobs == Some(0) {
        return Err(Failure::Usage("--jobs: must be at least 1".into()));
    }

    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Usage(format!("--jobs: {e}")))?;
    let results: Vec<gammareg::Result<SuiteReport>> =
        pool.install(|| names.par_iter().map(|n| run_suite(n, &cfg)).collect());
    let mut reports = Vec::new();
    for r in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e @ (Error::InvalidConfig(_) | Error::Parse { .. } | Error::InvalidInput(_))) => {
                return Err(Failure::Usage(e.to_string()))
            }
            Err(e) => return Err(Failure::Assertion(e.to_string())),
        }
    }

    fs::create_dir_all(&out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    let mut artifacts = Vec::new();
    for rep in &reports {
        write(&out, &format!("{}.csv", rep.suite), &rep.csv(), &mut artifacts)?;
        for (name, text) in &rep.tables {
            write(&out, name, text, &mut artifacts)?;
        }
    }

    let mut failures: Vec<String> = reports
        .iter()
        .flat_map(|r| r.checks.iter().filter(|c| !c.passed).map(move |c| (r, c)))
        .map(|(r, c)| format!("{}: {} = {} against {} (margin {:.3e})", r.suite, c.name, c.value, c.bound, c.margin))
        .collect();
    let warnings: Vec<String> =
        reports.iter().flat_map(|r| r.warnings.iter().map(move |w| format!("{}: {w}", r.suite))).collect();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if opts.strict {
        failures.extend(warnings.iter().map(|w| format!("strict: {w}")));
    }

    let effective = toml::to_string(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    let verdicts: Vec<_> = if names.len() == SUITES.len() { criteria(&reports) } else { Vec::new() };
    let manifest = json!({
        "config_sha256": sha256(&effective),
        "seeds": {
            "global": cfg.seed,
            "suites": reports.iter().map(|r| json!({ "suite": r.suite, "seed": r.seed })).collect::<Vec<_>>(),
        },
        "versions": { "gammareg": env!("CARGO_PKG_VERSION") },
        "started_unix": started,
        "wall_clock_secs": clock.elapsed().as_secs_f64(),
        "strict": opts.strict,
        "suites": reports,
        "criteria": verdicts,
        "artifacts": artifacts,
        "passed": failures.is_empty(),
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Usage(e.to_string()))? + "\n";
    fs::write(out.join("manifest.json"), text).map_err(|e| Failure::Usage(e.to_string()))?;

    for rep in &reports {
        let passed = rep.checks.iter().filter(|c| c.passed).count();
        println!("{:<11} seed {:>20}  {passed}/{} checks  {:.1}s", rep.suite, rep.seed, rep.checks.len(), rep.elapsed_secs);
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(failures.join("\n")))
    }
}

fn main() -> ExitCode {
    // `gammareg run heat` and `gammareg heat` are the same command.
    let mut args: Vec<String> = std::env::args().collect();
    if args.get(1).map(String::as_str) == Some("run") {
        args.remove(1);
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Assertion(msg)) => {
            eprintln!("FAILED\n{msg}");
            ExitCode::from(1)
        }
    }
}
