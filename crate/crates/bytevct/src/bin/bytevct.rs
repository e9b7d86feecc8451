fn main() {
    std::process::exit(bytevct::cli::run(std::env::args_os()));
}
