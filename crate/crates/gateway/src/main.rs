fn main() {
    std::process::exit(morpho_gateway::cli::run(std::env::args_os()));
}
