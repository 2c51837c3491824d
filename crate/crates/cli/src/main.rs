use clap::Parser;
use saarb_cli::{run, Cli, THREADS_ENV};

fn main() {
    let cli = Cli::parse();
    let threads = std::env::var(THREADS_ENV).ok();
    let code = run(&cli, threads.as_deref(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
