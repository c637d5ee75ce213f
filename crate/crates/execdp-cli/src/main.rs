fn main() {
    std::process::exit(execdp_cli::main_with_args(std::env::args_os()));
}
