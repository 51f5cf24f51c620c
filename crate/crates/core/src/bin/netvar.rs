fn main() {
    std::process::exit(netvar::cli::run(std::env::args_os()));
}
