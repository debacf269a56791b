use clap::Parser;

fn main() {
    let cli = dpdd::cli::Cli::parse();
    std::process::exit(dpdd::cli::run(cli));
}
