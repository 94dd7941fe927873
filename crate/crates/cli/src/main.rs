fn main() {
    std::process::exit(drgn_cli::run(std::env::args_os()));
}
