fn main() {
    std::process::exit(ledgen::cli::run(std::env::args_os()));
}
