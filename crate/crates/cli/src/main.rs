fn main() {
    std::process::exit(expulsive_cli::run(std::env::args_os()));
}
