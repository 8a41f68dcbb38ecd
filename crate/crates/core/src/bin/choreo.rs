fn main() {
    std::process::exit(choreo::cli::run(std::env::args_os()));
}
