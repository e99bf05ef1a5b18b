use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use arith_sampling::cli::{run, Cli, ExitStatus, RunConfig};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                // usage errors are input errors; 2 is reserved for property failures
                _ => ExitCode::from(ExitStatus::InputError as u8),
            };
        }
    };
    let (kind, args) = cli.command.split();
    let outcome = RunConfig::from_args(kind, args).and_then(|config| {
        let outcome = run(&config)?;
        match &config.out {
            Some(path) => std::fs::write(path, &outcome.csv)
                .map_err(|e| arith_sampling::Error::Input(format!("{}: {e}", path.display())))?,
            None => print!("{}", outcome.csv),
        }
        Ok(outcome)
    });
    match outcome {
        Ok(o) => ExitCode::from(o.status as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(ExitStatus::InputError as u8)
        }
    }
}
