fn main() {
    std::process::exit(patchwork::io::cli::run_cli(std::env::args()));
}
