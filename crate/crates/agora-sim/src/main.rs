use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use agora::mechanisms::{MechanismKind, NaiveOptions};
use agora_sim::{
    advisory_bic_regret, audit_battery, load_scenario, report_json, reproduce_example_one,
    reproduce_example_prob, run_replications, write_csv, AdvisoryRegret, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "agora-sim",
    version,
    about = "Seeded market mechanism simulations, reproductions, and exact incentive audits"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one mechanism on a scenario file, sampled or enumerated
    Run(RunArgs),
    /// Run the exact incentive and guarantee audits on a scenario file
    Audit(AuditArgs),
    /// Reproduce one of the three built-in benchmark markets
    Example(ExampleArgs),
}

fn parse_mechanism(s: &str) -> Result<MechanismKind, String> {
    s.parse().map_err(|e: agora::mechanisms::MechError| e.to_string())
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file
    #[arg(long)]
    scenario: PathBuf,
    /// One of: tr-da, hybrid-da, tr-matching, offering, hybrid-matching,
    /// rvwm, naive-max, naive-qswitch
    #[arg(long, value_parser = parse_mechanism)]
    mechanism: MechanismKind,
    #[arg(long, default_value_t = 1000)]
    reps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Walk the whole finite type space instead of sampling
    #[arg(long)]
    enumerate: bool,
    /// Write the JSON report here as well as to stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one CSV row per mechanism evaluation
    #[arg(long)]
    csv: Option<PathBuf>,
    /// naive-max compares against the realized coin branch instead of the
    /// coin average
    #[arg(long)]
    naive_realized: bool,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_parser = parse_mechanism)]
    mechanism: MechanismKind,
    /// Also run the full deviation tables (quadratic in the type space)
    #[arg(long)]
    exhaustive: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    naive_realized: bool,
    /// Replications per probe for the advisory Monte Carlo regret used on
    /// continuous scenarios
    #[arg(long, default_value_t = 400)]
    draws: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExampleArgs {
    /// Which built-in market: 1, 2, or 3
    which: u8,
    /// Traders per side (market 1 only)
    #[arg(long, default_value_t = 400)]
    n: usize,
    /// Replications; defaults to 200 for market 1 and 200000 otherwise
    #[arg(long)]
    reps: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct AuditOutput {
    scenario: String,
    mechanism: String,
    exhaustive: bool,
    pass: bool,
    reports: Vec<agora::audit::AuditReport>,
    advisory: Vec<AdvisoryRegret>,
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    print!("{text}");
    if let Some(path) = out {
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let scenario = load_scenario(&args.scenario)?;
    let cfg = RunConfig {
        scenario,
        label: args.scenario.display().to_string(),
        mechanism: args.mechanism,
        replications: args.reps,
        seed: args.seed,
        enumerate: args.enumerate,
        naive: NaiveOptions { compare_realized: args.naive_realized },
    };
    let (report, rows) = run_replications(&cfg)?;
    if let Some(path) = &args.csv {
        write_csv(path, &rows)?;
    }
    emit(&report_json(&report), args.out.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_audit(args: &AuditArgs) -> Result<ExitCode> {
    let scenario = load_scenario(&args.scenario)?;
    let label = args.scenario.display().to_string();
    let naive = NaiveOptions { compare_realized: args.naive_realized };
    let mut reports = Vec::new();
    let mut advisory = Vec::new();
    if scenario.profile_space_size().is_some() {
        reports = audit_battery(&scenario, &label, args.mechanism, args.exhaustive, &naive)?;
    } else {
        // continuous laws cannot be enumerated; fall back to the advisory
        // sampled regret probe
        advisory.push(advisory_bic_regret(
            &scenario,
            &label,
            args.mechanism,
            &naive,
            16,
            args.draws,
            args.seed,
        )?);
    }
    let pass = reports.iter().all(|r| r.pass);
    let output = AuditOutput {
        scenario: label,
        mechanism: args.mechanism.label().to_string(),
        exhaustive: args.exhaustive,
        pass,
        reports,
        advisory,
    };
    emit(&report_json(&output), args.out.as_ref())?;
    Ok(if pass { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_example(args: &ExampleArgs) -> Result<ExitCode> {
    let report = match args.which {
        1 => reproduce_example_one(args.n, args.reps.unwrap_or(200), args.seed)?,
        2 | 3 => reproduce_example_prob(args.which, args.reps.unwrap_or(200_000), args.seed)?,
        other => anyhow::bail!("no built-in market {other}; choose 1, 2, or 3"),
    };
    emit(&report_json(&report), args.out.as_ref())?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Audit(args) => cmd_audit(args),
        Cmd::Example(args) => cmd_example(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
