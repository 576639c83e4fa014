//! `sinn`: generate data, train, evaluate and inspect structured label
//! inference models.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod cmd;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "sinn", version, about = "Structured label inference over layered label graphs")]
struct Cli {
    /// Worker threads; 0 uses one per core and 1 runs serially.
    #[arg(long, global = true, env = "SINN_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    GenData(cmd::gen_data::GenDataArgs),
    Train(cmd::train::TrainArgs),
    Eval(cmd::eval::EvalArgs),
    Predict(cmd::predict::PredictArgs),
    GradCheck(cmd::grad_check::GradCheckArgs),
    InspectGraph(cmd::inspect::InspectArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let result = match cli.command {
        Command::GenData(a) => cmd::gen_data::run(a),
        Command::Train(a) => cmd::train::run(a),
        Command::Eval(a) => cmd::eval::run(a),
        Command::Predict(a) => cmd::predict::run(a),
        Command::GradCheck(a) => cmd::grad_check::run(a),
        Command::InspectGraph(a) => cmd::inspect::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
