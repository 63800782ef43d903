fn main() {
    std::process::exit(radview::cli::run(std::env::args_os()));
}
