use clap::Parser;

fn main() {
    let cli = polymer2d_cli::Cli::parse();
    std::process::exit(polymer2d_cli::execute(cli));
}
