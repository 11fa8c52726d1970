fn main() {
    std::process::exit(lungkit::cli::run(std::env::args_os()));
}
