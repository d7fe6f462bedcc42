fn main() {
    std::process::exit(gaitguard::cli::run(std::env::args_os().collect()));
}
