fn main() {
    std::process::exit(gwtrees::cli::main_with_args(std::env::args_os()));
}
