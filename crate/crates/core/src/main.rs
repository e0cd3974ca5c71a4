fn main() {
    std::process::exit(tworiem::cli::main_with_args(std::env::args_os()));
}
