//! `confscout`: instance-wise solver configuration pipeline.
//!
//! Subcommands mirror the pipeline stages: configs, generate, collect,
//! select, train, predict, cluster-fit, cluster-predict, evaluate, report,
//! and pipeline (all stages end to end on synthetic data).
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 adapter failure.
//! Machine-readable artifacts go to files/stdout; human progress goes to
//! stderr, gated by `CONFSCOUT_LOG` (quiet|info|debug).

mod commands;
mod io_util;

use clap::error::ErrorKind;
use clap::Parser;

use commands::{Cli, CliError};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => {}
        Err(error) => {
            eprintln!("confscout: {error}");
            std::process::exit(error.exit_code());
        }
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Adapter(_) => 3,
        }
    }
}
