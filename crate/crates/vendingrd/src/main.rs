use clap::Parser;
use vendingrd::commands::{run, Cli};

fn main() {
    let cli = Cli::parse();
    let result = vendingrd::configure_threads().and_then(|()| run(cli));
    if let Err(e) = result {
        eprintln!("vendingrd: {e}");
        std::process::exit(e.exit_code());
    }
}
