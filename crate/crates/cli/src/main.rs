fn main() {
    std::process::exit(macrohom_cli::run(std::env::args_os()));
}
