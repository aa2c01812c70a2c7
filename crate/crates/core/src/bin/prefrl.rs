//! Command-line front end for running dueling-preference experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use prefrl::harness::{
    run_experiment, write_outputs, Algorithm, ExperimentConfig, ExperimentResult, Verdict,
};

#[derive(Parser)]
#[command(name = "prefrl", version, about = "Dueling-preference RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write curve.csv and summary.json.
    Run(Overrides),
    /// Run the invariant suite only; nothing is written.
    Check(Overrides),
}

#[derive(Args)]
struct Overrides {
    config: PathBuf,
    /// Comma-separated seed list replacing the configured one.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    algo: Option<Algorithm>,
}

impl Overrides {
    fn load(&self) -> prefrl::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seeds) = &self.seeds {
            cfg.seeds = seeds.clone();
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        if let Some(algo) = self.algo {
            cfg.algorithm = algo;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn report(result: &ExperimentResult) {
    let s = &result.summary;
    if let (Some(scr), Some(pref)) = (s.final_regret_scr, s.final_regret_pref) {
        println!(
            "{} rounds, {} seeds: R_scr = {:.4} ± {:.4}, R_pref = {:.4} ± {:.4}",
            s.rounds,
            s.seeds.len(),
            scr.mean,
            scr.se,
            pref.mean,
            pref.se
        );
    }
    if let Some(slope) = s.sublinearity_metric {
        println!("log-log slope over [T/4, T]: {slope:.4}");
    }
    for c in &s.checks {
        let tag = match c.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::NotApplicable => "N/A ",
        };
        println!("{tag} {:<28} {}", c.name, c.detail);
    }
}

fn execute(cli: Cli) -> prefrl::Result<bool> {
    let (overrides, write) = match &cli.command {
        Command::Run(o) => (o, true),
        Command::Check(o) => (o, false),
    };
    let cfg = overrides.load()?;
    let result = run_experiment(&cfg)?;
    report(&result);
    if write {
        let dir = cfg.output.clone().unwrap_or_else(|| PathBuf::from("out"));
        write_outputs(&result, &dir, cfg.plot)?;
        println!("wrote {}", dir.display());
    }
    Ok(result.passed())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
