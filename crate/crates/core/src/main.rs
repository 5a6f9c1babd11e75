fn main() {
    std::process::exit(crplus::cli::run(std::env::args_os()));
}
