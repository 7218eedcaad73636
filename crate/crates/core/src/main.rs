use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use isogeom::harness::{expect, run_bounds, run_selftest, simulate, ExperimentConfig, Runner};
use isogeom::Error;

#[derive(Parser)]
#[command(name = "isogeom", version, about = "Expected level-set geometry of random eigenfunction polynomials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config (key = value file).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the master seed of the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "ISOGEOM_THREADS", default_value_t = 0)]
    threads: usize,
    /// Report path; defaults to the config's `output`, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Print every closed form that applies to the configured eigenspace.
    Expect(RunArgs),
    /// Run the Monte Carlo experiment and compare with the closed forms.
    Simulate(RunArgs),
    /// Check the norm inequalities on simulated samples.
    Bounds(RunArgs),
    /// Run the built-in invariant suites.
    Selftest {
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

/// Exit codes: 0 pass, 1 statistical failure, 2 config error, 3 internal
/// error.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidSpec(_) | Error::Resolution(_) => 2,
        _ => 3,
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn sink(args: &RunArgs, cfg: &ExperimentConfig) -> Result<Box<dyn Write>, Error> {
    Ok(match args.out.as_ref().or(cfg.output.as_ref()) {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::Expect(args) => {
            let cfg = load(&args)?;
            let table = expect(&cfg)?;
            let mut w = sink(&args, &cfg)?;
            match args.format {
                Format::Json => writeln!(w, "{}", serde_json::to_string_pretty(&table)?)?,
                Format::Csv => table.write_csv(w)?,
            }
            Ok(true)
        }
        Command::Simulate(args) => {
            let cfg = load(&args)?;
            let runner = Runner::new(args.threads)?;
            let report = simulate(&cfg, &runner)?;
            let mut w = sink(&args, &cfg)?;
            match args.format {
                Format::Json => writeln!(w, "{}", report.to_json()?)?,
                Format::Csv => report.write_csv(w)?,
            }
            for r in report.rows.iter().filter(|r| r.verdict == isogeom::harness::Verdict::Fail) {
                eprintln!(
                    "fail: {} t={:?} mean={} closed_form={} stderr={}",
                    r.quantity, r.t_scaled, r.estimate.mean, r.closed_form.value, r.estimate.stderr
                );
            }
            Ok(report.passed())
        }
        Command::Bounds(args) => {
            let cfg = load(&args)?;
            let runner = Runner::new(args.threads)?;
            let report = run_bounds(&cfg, &runner)?;
            let mut w = sink(&args, &cfg)?;
            match args.format {
                Format::Json => writeln!(w, "{}", report.to_json()?)?,
                Format::Csv => report.write_csv(w)?,
            }
            Ok(report.passed)
        }
        Command::Selftest { format } => {
            let report = run_selftest();
            let mut out = io::stdout().lock();
            match format {
                Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?,
                Format::Csv => {
                    let mut wr = csv::Writer::from_writer(out);
                    wr.write_record(["suite", "check", "passed", "detail"])?;
                    for s in &report.suites {
                        for c in &s.checks {
                            wr.serialize((&s.name, &c.name, c.passed, &c.detail))?;
                        }
                    }
                    wr.flush()?;
                }
            }
            for f in report.failures() {
                eprintln!("fail: {f}");
            }
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
