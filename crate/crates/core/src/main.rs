fn main() {
    std::process::exit(mdplab::cli::run_cli(std::env::args_os()));
}
