fn main() {
    std::process::exit(dynfield::cli::main_with_args(std::env::args_os()));
}
