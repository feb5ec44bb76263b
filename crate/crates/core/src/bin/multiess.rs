fn main() {
    std::process::exit(multiess::cli::main_with_args(std::env::args_os()));
}
