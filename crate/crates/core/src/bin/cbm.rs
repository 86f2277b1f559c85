fn main() {
    std::process::exit(causal_behaviour::cli::run(std::env::args_os()));
}
