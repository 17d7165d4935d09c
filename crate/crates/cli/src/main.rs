use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = arena_cli::Cli::parse();
    match arena_cli::run(cli, &mut std::io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("arena: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
