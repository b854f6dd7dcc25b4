fn main() {
    std::process::exit(acquest::cli::main_with_args(std::env::args_os()));
}
