fn main() {
    std::process::exit(bpvei_cli::run(std::env::args_os()));
}
