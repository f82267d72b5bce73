fn main() {
    std::process::exit(lfrerank::cli::main_with_args(std::env::args_os()));
}
