fn main() {
    std::process::exit(ssl_lab::cli::run_cli(std::env::args_os()));
}
