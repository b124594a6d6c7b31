use std::process::ExitCode;

use clap::Parser;
use dyntwist::cli::{run, Cli, Status};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version are not input errors
            return if e.use_stderr() { ExitCode::from(Status::Input as u8) } else { ExitCode::SUCCESS };
        }
    };
    let (status, report) = run(&cli);
    if matches!(status, Status::Pass | Status::Residual) {
        print!("{report}");
    } else {
        eprint!("{report}");
    }
    ExitCode::from(status as u8)
}
