use std::path::PathBuf;
use std::process::ExitCode;

use batt_core::handover::PolicyKind;
use batt_harness::experiments::{run_handover, run_sweep, run_threshold, SEARCHERS};
use batt_harness::{suite, ExperimentConfig, ExperimentKind, HarnessError, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "batt", version, about = "Threshold search and handover ordering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare the binary and uniform threshold searchers.
    Threshold(RunArgs),
    /// Compare handover measurement-ordering policies.
    Handover(RunArgs),
    /// Run a base experiment over a grid of parameter values.
    Sweep(RunArgs),
    /// Cross-check the algorithms against brute-force oracles.
    Verify {
        /// Seed for the randomly drawn oracle instances.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `run.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Loads the file and applies command-line overrides. The subcommand decides
/// which experiment runs, so one file can drive all of them.
fn load(args: &RunArgs, kind: ExperimentKind) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    cfg.experiment = kind;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.run.out_dir = out.clone();
    }
    Ok(cfg)
}

fn threshold(args: &RunArgs) -> Result<()> {
    let cfg = load(args, ExperimentKind::Threshold)?;
    let report = run_threshold(&cfg, Some(&cfg.run.out_dir))?;
    println!(
        "threshold: {} trials, R = {}, epsilon = {:.6}, optimal arm {}",
        report.trials.len(),
        report.threshold,
        report.epsilon,
        report.optimal_arm
    );
    println!("{:<10} {:>14} {:>18} {:>14}", "searcher", "violations", "|cum signed diff|", "coarse regret");
    for (s, name) in SEARCHERS.iter().enumerate() {
        println!(
            "{:<10} {:>14.1} {:>18.1} {:>14.1}",
            name,
            report.mean(s, |st| st.violations as f64),
            report.mean(s, |st| st.cum_signed_diff.abs()),
            report.mean(s, |st| st.coarse_regret as f64),
        );
    }
    println!("wrote {}", cfg.run.out_dir.display());
    Ok(())
}

fn handover(args: &RunArgs) -> Result<()> {
    let cfg = load(args, ExperimentKind::Handover)?;
    let report = run_handover(&cfg, Some(&cfg.run.out_dir))?;
    println!("handover: {} trials x {} users", report.trials.len(), cfg.run.users);
    println!("{:<18} {:>10} {:>10}", "policy", "success", "stddev");
    for row in report.summary().iter().filter(|r| r.metric == "success_rate") {
        println!("{:<18} {:>10.4} {:>10.4}", row.group, row.mean, row.stddev);
    }
    if let (Some(opp), Some(base)) = (
        report.mean_success(PolicyKind::OpportunisticTs),
        report.mean_success(PolicyKind::Baseline),
    ) {
        if base < 1.0 {
            let cut = 1.0 - (1.0 - opp) / (1.0 - base);
            println!("failure reduction vs baseline: {:.1}%", 100.0 * cut);
        }
    }
    println!("wrote {}", cfg.run.out_dir.display());
    Ok(())
}

fn sweep(args: &RunArgs) -> Result<()> {
    let cfg = load(args, ExperimentKind::Sweep)?;
    let report = run_sweep(&cfg, Some(&cfg.run.out_dir))?;
    println!("sweep over {} points of the {} experiment", report.points.len(), report.base);
    println!("wrote {}", cfg.run.out_dir.join("sweep_summary.csv").display());
    Ok(())
}

fn verify(seed: u64) -> Result<bool> {
    let mut ok = true;
    for s in suite::run_all(seed)? {
        for r in &s.reports {
            println!("{r}");
        }
        println!(
            "{}: {} ({} checked, {} disagreements)",
            if s.passed() { "PASS" } else { "FAIL" },
            s.name,
            s.checked,
            s.failures()
        );
        ok &= s.passed();
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Threshold(a) => threshold(a).map(|_| true),
        Command::Handover(a) => handover(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Verify { seed } => verify(*seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        // An oracle disagreement means an algorithm broke its contract.
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("batt: {e}");
            let code = HarnessError::exit_code(&e);
            ExitCode::from(code as u8)
        }
    }
}
