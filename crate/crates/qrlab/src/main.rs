fn main() {
    std::process::exit(qrlab::cli::run(std::env::args_os()));
}
