use std::io::{BufWriter, Write};
use std::process::ExitCode;

use clap::Parser;
use monopsc_cli::{commands, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = BufWriter::new(std::io::stdout().lock());
    let result = commands::dispatch(&cli, &mut stdout);
    if let Err(err) = stdout.flush() {
        eprintln!("error: {err}");
        return ExitCode::from(2);
    }
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code_for(&err))
        }
    }
}
