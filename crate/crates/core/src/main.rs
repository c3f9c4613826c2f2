use clap::Parser;

use modile::cli::{run, Cli, EXIT_CHECKS_FAILED};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => {}
        Ok(false) => {
            eprintln!("modile: checks failed");
            std::process::exit(EXIT_CHECKS_FAILED);
        }
        Err(e) => {
            eprintln!("modile: error: {e}");
            std::process::exit(2);
        }
    }
}
