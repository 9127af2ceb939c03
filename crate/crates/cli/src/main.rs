mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;
use hinsim::ErrorKind;

use crate::args::Cli;
use crate::output::CliError;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("METAPATH_SIM_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report(CliError::usage(e.to_string().trim_end().to_string()));
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(match e.kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    })
}
