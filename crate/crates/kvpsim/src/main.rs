fn main() {
    std::process::exit(kvpsim::cli::run_cli(std::env::args_os()));
}
