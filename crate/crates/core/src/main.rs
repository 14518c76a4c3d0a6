fn main() {
    std::process::exit(percept::cli::run(std::env::args_os()));
}
