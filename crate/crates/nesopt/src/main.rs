fn main() {
    std::process::exit(nesopt::cli::run(std::env::args()));
}
