fn main() {
    std::process::exit(raylign_cli::run(std::env::args_os()));
}
