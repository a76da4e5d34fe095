use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use plmpc_runner::config::ExperimentConfig;
use plmpc_runner::manifest::write_run;
use plmpc_runner::report::{costs_table, Summary, SUMMARY_JSON};
use plmpc_runner::verify::verify_run;
use plmpc_runner::{run_experiment, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "plmpc", version, about = "Robust learning MPC experiments for periodic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long, value_enum)]
        scenario: Option<Scenario>,
    },
    /// Print the per-iteration cost table of a finished run.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Re-check a persisted run.
    Verify {
        #[arg(long)]
        run: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scenario {
    SpringMass,
    Building,
    Tiny,
}

impl Scenario {
    fn name(self) -> &'static str {
        match self {
            Scenario::SpringMass => plmpc_core::scenarios::SPRING_MASS,
            Scenario::Building => plmpc_core::scenarios::BUILDING,
            Scenario::Tiny => plmpc_core::scenarios::TINY,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn run(config: PathBuf, out: Option<PathBuf>, seed: Option<u64>, iterations: Option<usize>, scenario: Option<Scenario>) -> Result<(), RunError> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(j) = iterations {
        cfg.iterations = j;
    }
    if let Some(s) = scenario {
        cfg.scenario.name = Some(s.name().into());
        cfg.scenario.inline = None;
    }
    cfg.validate()?;
    let dir = out
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| RunError::Usage("no output directory: pass --out or set output_dir".into()))?;
    let exp = run_experiment(&cfg, RunOptions::default())?;
    let manifest = write_run(&exp, &dir)?;
    for m in exp.iterations.iter().map(|o| &o.metrics) {
        println!("iteration {:>3}  J* {:>14.6}  J {:>14.6}  diff {:>+12.3e}", m.iteration, m.optimal_cost, m.lmpc_cost, m.difference);
    }
    println!("wrote {} artifacts to {}", manifest.artifacts.len() + 1, dir.display());
    match exp.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn report(dir: PathBuf, format: Format) -> Result<(), RunError> {
    let path = dir.join(SUMMARY_JSON);
    let bytes = std::fs::read(&path).map_err(|e| RunError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let summary: Summary =
        serde_json::from_slice(&bytes).map_err(|e| RunError::Artifact { path: path.display().to_string(), message: e.to_string() })?;
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&summary.rows).expect("rows serialize")),
        Format::Csv => {
            let (header, rows) = costs_table(&summary.rows);
            let mut w = csv::Writer::from_writer(std::io::stdout());
            let fail = |e: csv::Error| RunError::Usage(format!("stdout: {e}"));
            w.write_record(&header).map_err(fail)?;
            for r in rows {
                w.write_record(&r).map_err(fail)?;
            }
            w.flush().map_err(|e| RunError::Usage(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn verify(dir: PathBuf) -> Result<(), RunError> {
    let rep = verify_run(&dir)?;
    for f in &rep.findings {
        let mark = if f.passed { "ok  " } else { "FAIL" };
        if f.detail.is_empty() {
            println!("{mark} {}", f.check);
        } else {
            println!("{mark} {}: {}", f.check, f.detail);
        }
    }
    if rep.passed() {
        Ok(())
    } else {
        Err(RunError::Invariant("verification failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run { config, out, seed, iterations, scenario } => run(config, out, seed, iterations, scenario),
        Command::Report { run, format } => report(run, format),
        Command::Verify { run } => verify(run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
