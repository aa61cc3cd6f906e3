use clap::Parser;
use snn_lab::cli::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = snn_lab::commands::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
