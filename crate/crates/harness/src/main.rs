use clap::Parser;
use psgld_irl::cli::{run, Cli};
use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads)
        .build_global()
        .map_err(anyhow::Error::from)
        .and_then(|()| run(&cli))
        .and_then(|r| r.render());
    match result {
        Ok(text) => {
            let _ = std::io::stdout().write_all(text.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
