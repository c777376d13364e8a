//! `morphnet`: generate artificial-language datasets, train recurrent
//! networks on them, run the replication suites and summarize results.
//!
//! Exit codes:
//!
//! | code | meaning                                        |
//! |------|------------------------------------------------|
//! | 0    | success                                        |
//! | 1    | other failure                                  |
//! | 2    | bad command line                               |
//! | 3    | malformed config, dataset or result file       |
//! | 4    | missing or unreadable file                     |
//! | 5    | dimension mismatch                             |
//! | 6    | a run diverged (results are still written)     |
//! | 7    | `report` found results from different configs  |

mod commands;

use std::process::ExitCode;

use clap::Parser;
use morphnet_core::Error;

use commands::Cli;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Format { .. } | Error::InventoryFormat { .. } | Error::UnknownPhone(_) => 3,
        Error::Io { .. } => 4,
        Error::Dimension { .. } => 5,
        Error::Divergence { .. } => 6,
        Error::MixedHashes(_) => 7,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("morphnet: {e}");
            if matches!(e, Error::MixedHashes(_)) {
                eprintln!("morphnet: pass --force to summarize them together");
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
