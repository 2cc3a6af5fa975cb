fn main() {
    std::process::exit(sentigan::cli::main_with_args(std::env::args_os()));
}
