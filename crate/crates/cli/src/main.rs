fn main() {
    std::process::exit(xbcf_cli::run(std::env::args_os()));
}
