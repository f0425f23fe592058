fn main() {
    std::process::exit(earsight_cli::run(std::env::args_os()));
}
