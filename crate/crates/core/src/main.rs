use clap::Parser;

fn main() {
    let cli = imsim::cli::Cli::parse();
    if let Err(e) = imsim::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
