fn main() {
    std::process::exit(blrm::cli::run(std::env::args_os()));
}
