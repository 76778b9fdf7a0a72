fn main() {
    std::process::exit(robust_policy::cli::run(std::env::args_os()));
}
