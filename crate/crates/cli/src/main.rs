fn main() {
    std::process::exit(ddbridge_cli::run(std::env::args_os()));
}
