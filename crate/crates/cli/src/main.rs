fn main() {
    std::process::exit(blockfield_cli::run(std::env::args_os()));
}
