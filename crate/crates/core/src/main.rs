fn main() {
    std::process::exit(mevolve::cli::main_with(std::env::args_os()));
}
