fn main() {
    std::process::exit(trajtopo::cli::main_with_args(std::env::args_os()));
}
