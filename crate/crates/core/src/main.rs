fn main() {
    std::process::exit(skyfit::cli::run(std::env::args_os()));
}
