fn main() {
    std::process::exit(annokit_cli::run(std::env::args_os()));
}
