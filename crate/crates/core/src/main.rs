use clap::Parser;

fn main() {
    let cli = invman::cli::Cli::parse();
    std::process::exit(invman::cli::run(cli));
}
