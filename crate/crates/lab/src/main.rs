fn main() {
    std::process::exit(dampwave::cli::run(std::env::args_os()));
}
