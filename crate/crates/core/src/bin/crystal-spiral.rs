fn main() {
    std::process::exit(crystal_spiral::cli::run(std::env::args_os()));
}
