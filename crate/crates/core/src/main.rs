fn main() {
    std::process::exit(microstates::cli::main_with_args(std::env::args_os()));
}
