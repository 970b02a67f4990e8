use clap::Parser;
use qgrad_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli.command) {
        eprintln!("qgrad: {e}");
        std::process::exit(e.exit_code());
    }
}
