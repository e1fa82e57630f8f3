fn main() {
    std::process::exit(ventcast::cli::run(std::env::args_os()));
}
