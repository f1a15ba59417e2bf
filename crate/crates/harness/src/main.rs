use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use peer_eval::config::{AutoExamPolicy, RunConfig};
use peer_eval::error::exit;
use peer_eval::pipeline::{self, Run};
use peer_eval::{HarnessError, Result};
use peer_eval_core::PromptSetting;

#[derive(Parser)]
#[command(name = "peer-eval", version, about = "Rank models by peer review among qualified reviewer models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Qualification exam; writes profiles.jsonl.
    Exam,
    /// Review jobs for passed reviewers; writes records.jsonl.
    Review,
    /// Aggregate judgments; writes aggregates.jsonl and leaderboard.json.
    Chair,
    /// Metrics against gold and preference gaps; writes report.json and pg_matrix.csv.
    Report,
    /// All stages in order.
    RunAll,
}

#[derive(Args)]
struct Flags {
    /// Run config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    setting: Option<PromptSetting>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Require order-swap consistency on top of the gold exam.
    #[arg(long, global = true)]
    auto_exam: bool,
    /// Keep finished review jobs and run only the rest.
    #[arg(long, global = true)]
    resume: bool,
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// No stage summaries on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
}

fn load(flags: &Flags) -> Result<RunConfig> {
    let path = flags
        .config
        .as_deref()
        .ok_or_else(|| HarnessError::Config("--config is required".into()))?;
    let mut config = RunConfig::load(path)?;
    if let Some(s) = flags.setting {
        config.setting = s;
    }
    if let Some(s) = flags.seed {
        config.seed = s;
    }
    if flags.auto_exam && config.auto_exam == AutoExamPolicy::Off {
        config.auto_exam = AutoExamPolicy::WithExam;
    }
    if let Some(d) = &flags.cache_dir {
        config.cache_dir = Some(d.clone());
    }
    if let Some(d) = &flags.out {
        config.out_dir = d.clone();
    }
    Ok(config)
}

fn execute(command: Command, flags: &Flags) -> Result<bool> {
    let mut run = Run::new(load(flags)?)?;
    run.verbose = !flags.quiet;
    Ok(match command {
        Command::Exam => {
            pipeline::cmd_exam(&run)?;
            false
        }
        Command::Review => pipeline::cmd_review(&run, flags.resume)?.failures > 0,
        Command::Chair => {
            pipeline::cmd_chair(&run)?;
            false
        }
        Command::Report => {
            let report = pipeline::cmd_report(&run)?;
            if flags.quiet {
                print!("{}", peer_eval::report::console_table(&report));
            }
            false
        }
        Command::RunAll => pipeline::run_all(&run, flags.resume)?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command, &cli.flags) {
        Ok(false) => ExitCode::from(exit::OK as u8),
        Ok(true) => {
            eprintln!("finished with failures; see failures.jsonl");
            ExitCode::from(exit::PARTIAL as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
