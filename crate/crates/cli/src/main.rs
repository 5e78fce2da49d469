mod commands;
mod config;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use commands::{run, write_atomic, CliError};
use config::{Cli, RunConfig, DEFAULT_STRUCTURE_TOLERANCE, DEFAULT_TOLERANCE};

fn resolve(cli: Cli) -> Result<(RunConfig, Option<std::path::PathBuf>), CliError> {
    let config = match (cli.config, cli.command) {
        (Some(_), Some(_)) => return Err(CliError::Usage("--config cannot be combined with a subcommand".into())),
        (Some(path), None) => {
            let text = std::fs::read_to_string(&path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            RunConfig::from_json(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))?
        }
        (None, Some(command)) => RunConfig {
            tolerance: cli.tolerance.unwrap_or(DEFAULT_TOLERANCE),
            structure_tolerance: cli.structure_tolerance.unwrap_or(DEFAULT_STRUCTURE_TOLERANCE),
            command,
        },
        (None, None) => return Err(CliError::Usage("a subcommand or --config is required".into())),
    };
    Ok((config, cli.save_config))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", CliError::Usage(e.to_string().trim().to_string()).to_json());
            return ExitCode::from(1);
        }
    };
    let result = resolve(cli).and_then(|(config, save)| {
        if let Some(path) = save {
            let mut text = config.to_json()?;
            text.push('\n');
            write_atomic(&path, text.as_bytes())?;
        }
        run(&config)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
