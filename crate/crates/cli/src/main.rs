use clap::Parser;
use meshft_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("meshft {}: {e}", cli.command.name());
        std::process::exit(e.exit_code());
    }
}
