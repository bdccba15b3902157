fn main() {
    std::process::exit(crossnet::cli::run_from_args(std::env::args_os()));
}
