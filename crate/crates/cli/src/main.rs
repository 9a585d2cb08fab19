use clap::Parser;

fn main() {
    let cli = scatter1d_cli::Cli::parse();
    std::process::exit(scatter1d_cli::run(cli));
}
