use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match vgd_service::cli::execute(vgd_service::cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
