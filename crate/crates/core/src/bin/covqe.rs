use clap::Parser;

fn main() {
    std::process::exit(covqe::cli::run(covqe::cli::Cli::parse()));
}
