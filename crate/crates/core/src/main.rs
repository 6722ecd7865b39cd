fn main() {
    std::process::exit(germ_core::cli::main_with_args(std::env::args_os()));
}
