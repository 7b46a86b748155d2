use std::io::Write;
use std::process::ExitCode;

use alterlink_cli::{run, Cli};
use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.run_config().and_then(|cfg| run(cli.command, &cfg)) {
        Ok(out) => {
            // a closed pipe (e.g. `| head`) is not an error worth reporting
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}", out.summary);
            for f in &out.files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::FAILURE
        }
    }
}
