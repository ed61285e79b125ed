fn main() {
    std::process::exit(flatgen::cli::run(std::env::args_os()));
}
