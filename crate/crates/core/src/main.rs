use clap::Parser;

fn main() {
    std::process::exit(csi_scatter::cli::run(csi_scatter::cli::Cli::parse()));
}
