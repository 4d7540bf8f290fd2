use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stringnet::batch::batch_run;
use stringnet::error::Error;
use stringnet::output::{render_metrics_svg, render_paths_svg, write_batch_summary, write_text, write_trajectory};
use stringnet::scenario::Scenario;
use stringnet::sim::{run_with, Outcome};

#[derive(Parser)]
#[command(name = "stringnet", version, about = "StringNet herding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trajectory.
    Run {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write paths.svg and metrics.svg.
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "t-max")]
        t_max: Option<f64>,
    },
    /// Check a scenario and list every violated condition.
    Validate { scenario: PathBuf },
    /// Run many seeds in parallel and write a summary CSV.
    Batch {
        scenario: PathBuf,
        #[arg(long)]
        runs: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the minimum defender count, tracking bound and clearance margin.
    Bound { scenario: PathBuf },
}

const EXIT_FAILURE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_BREACH: u8 = 3;
const EXIT_TIMEOUT: u8 = 4;

fn fail(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    for v in e.violations() {
        eprintln!("  - {v}");
    }
    match e {
        Error::Validation(_) | Error::Parse { .. } => ExitCode::from(EXIT_VALIDATION),
        _ => ExitCode::from(EXIT_FAILURE),
    }
}

fn read_scenario(path: &Path) -> Result<Scenario, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_json(&text)
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn run(scenario: &Path, out: &Path, svg: bool, dt: Option<f64>, t_max: Option<f64>) -> Result<ExitCode, Error> {
    let mut s = read_scenario(scenario)?;
    if let Some(dt) = dt {
        s.sim.dt = dt;
    }
    if let Some(t) = t_max {
        s.sim.t_max = t;
    }
    s.validate()?;
    let log = run_with(&s, s.sim)?;
    create_dir(out)?;
    write_trajectory(&log, &out.join("trajectory.csv"))?;
    if svg {
        write_text(&out.join("paths.svg"), &render_paths_svg(&log, &s)?)?;
        write_text(&out.join("metrics.svg"), &render_metrics_svg(&log))?;
    }
    let m = log.max_metrics();
    let end = log.rows.last().map_or(0.0, |r| r.time);
    println!("outcome: {} at t = {end:.2} s", log.outcome.name());
    for e in &log.events {
        println!("  {:>8.2} s  {} -> {}", e.time, e.from.name(), e.to.name());
    }
    println!(
        "max ratios: dd {:.4}  ad {:.4}  aa {:.4}  ao {:.4}  do {:.4}",
        m.defender_defender, m.attacker_defender, m.attacker_attacker, m.attacker_obstacle, m.defender_obstacle
    );
    if !log.near_violations.is_empty() {
        println!("near violations on {} steps", log.near_violations.len());
    }
    Ok(match log.outcome {
        Outcome::Done => ExitCode::SUCCESS,
        Outcome::Breach => ExitCode::from(EXIT_BREACH),
        Outcome::Timeout => ExitCode::from(EXIT_TIMEOUT),
    })
}

fn batch(scenario: &Path, runs: usize, seed: u64, jobs: Option<usize>, out: &Path) -> Result<ExitCode, Error> {
    let s = read_scenario(scenario)?;
    s.validate()?;
    create_dir(out)?;
    let rows = batch_run(&s, runs, seed, jobs, Some(out))?;
    write_batch_summary(&rows, &out.join("batch_summary.csv"))?;
    let done = rows.iter().filter(|r| r.outcome == "done").count();
    println!("{done}/{} runs done ({:.1}%)", rows.len(), 100.0 * done as f64 / rows.len() as f64);
    Ok(ExitCode::SUCCESS)
}

fn bound(scenario: &Path) -> Result<ExitCode, Error> {
    let s = read_scenario(scenario)?;
    println!("N_d_min = {}", s.min_defenders()?);
    println!("b_d = {}", s.tracking_bound()?);
    println!("rho_bar = {}", s.clearance_margin()?);
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { scenario, out, svg, dt, t_max } => run(scenario, out, *svg, *dt, *t_max),
        Command::Validate { scenario } => read_scenario(scenario).and_then(|s| {
            s.validate()?;
            println!("{}: valid", scenario.display());
            Ok(ExitCode::SUCCESS)
        }),
        Command::Batch { scenario, runs, seed, jobs, out } => batch(scenario, *runs, *seed, *jobs, out),
        Command::Bound { scenario } => bound(scenario),
    };
    result.unwrap_or_else(|e| fail(&e))
}
