fn main() {
    std::process::exit(grcc::cli::main_with_args(std::env::args_os()));
}
