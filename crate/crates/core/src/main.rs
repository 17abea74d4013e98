fn main() {
    std::process::exit(qpl::cli::main_from(std::env::args_os()));
}
