mod config;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use config::{Config, Suite};
use suites::{run_suite, write_reports, RunSettings, SuiteOutcome};

#[derive(Parser)]
#[command(name = "roughlayer", version, about = "Layer potential experiments on two-sided meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites listed in the config (or on the command line).
    Run(RunArgs),
    /// Build the mesh and write it with its statistics.
    Mesh(RunArgs),
    /// Calderon, jump and Steklov-Poincare identities.
    Calderon(RunArgs),
    /// Spectrum of K, checked against the disk oracle for circles.
    Spectrum(RunArgs),
    /// Contraction constants of the second-kind operators.
    Contraction(RunArgs),
    /// Neumann series on random data.
    Series(RunArgs),
    /// Inclusion reconstruction and the monotone identity.
    Imaging(RunArgs),
    /// Operator quantities under uniform refinement.
    Convergence(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(value_name = "CONFIG", required_unless_present = "config")]
    path: Option<PathBuf>,
    #[arg(long, conflicts_with = "path")]
    config: Option<PathBuf>,
    /// Output directory; overrides [output] dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated suites; overrides [suites] run.
    #[arg(long, value_delimiter = ',')]
    suite: Vec<Suite>,
    /// Seed for random inputs; overrides [problem] seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run suites in parallel.
    #[arg(long)]
    concurrent: bool,
    /// Maximum number of suites running at once.
    #[arg(long)]
    threads: Option<usize>,
}

impl Command {
    fn split(self) -> (Option<Suite>, RunArgs) {
        match self {
            Command::Run(a) => (None, a),
            Command::Mesh(a) => (Some(Suite::Mesh), a),
            Command::Calderon(a) => (Some(Suite::Calderon), a),
            Command::Spectrum(a) => (Some(Suite::Spectrum), a),
            Command::Contraction(a) => (Some(Suite::Contraction), a),
            Command::Series(a) => (Some(Suite::Series), a),
            Command::Imaging(a) => (Some(Suite::Imaging), a),
            Command::Convergence(a) => (Some(Suite::Convergence), a),
        }
    }
}

fn main() -> ExitCode {
    let (only, args) = Cli::parse().command.split();
    let path = args.path.or(args.config).expect("clap requires a config");
    let cfg = match Config::load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let suites: Vec<Suite> = match only {
        Some(s) => vec![s],
        None if !args.suite.is_empty() => args.suite,
        None => cfg.suites.run.clone(),
    };
    let run = RunSettings {
        out_dir: args.out.unwrap_or_else(|| cfg.output.dir.clone()),
        seed: args.seed.unwrap_or(cfg.problem.seed),
    };
    if let Err(e) = std::fs::create_dir_all(&run.out_dir) {
        eprintln!("cannot create {}: {e}", run.out_dir.display());
        return ExitCode::from(2);
    }

    let concurrent = args.concurrent || cfg.suites.concurrent;
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let outcomes = if concurrent && suites.len() > 1 {
        run_concurrent(&suites, &cfg, &run, threads)
    } else {
        suites.iter().map(|&s| report(run_suite(s, &cfg, &run))).collect()
    };

    let all: Vec<_> = outcomes.iter().flat_map(|o| o.records.iter().cloned()).collect();
    if let Err(e) = write_reports(&cfg, &run.out_dir, "summary", &all) {
        eprintln!("cannot write summary: {e}");
        return ExitCode::from(1);
    }
    if outcomes.iter().all(SuiteOutcome::passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// Suites pulled from a shared queue by at most `threads` workers; results
/// come back in the requested order.
fn run_concurrent(suites: &[Suite], cfg: &Config, run: &RunSettings, threads: usize) -> Vec<SuiteOutcome> {
    let queue = Mutex::new(suites.iter().copied().enumerate());
    let done = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..threads.min(suites.len()) {
            scope.spawn(|| loop {
                let Some((i, s)) = queue.lock().unwrap().next() else { break };
                let o = report(run_suite(s, cfg, run));
                done.lock().unwrap().push((i, o));
            });
        }
    });
    let mut done = done.into_inner().unwrap();
    done.sort_by_key(|(i, _)| *i);
    done.into_iter().map(|(_, o)| o).collect()
}

fn report(o: SuiteOutcome) -> SuiteOutcome {
    let failed: Vec<_> = o.records.iter().filter(|r| !r.pass).collect();
    let status = if failed.is_empty() { "PASS" } else { "FAIL" };
    println!("{:<12} {status} ({} records, {:.1} s)", o.suite.name(), o.records.len(), o.seconds);
    for r in failed {
        match r.threshold {
            Some(t) => eprintln!("  {}: {} = {:.3e} (threshold {t:.3e})", o.suite.name(), r.quantity, r.value),
            None => eprintln!("  {}: {}", o.suite.name(), r.quantity),
        }
    }
    o
}
