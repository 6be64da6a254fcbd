fn main() {
    std::process::exit(haarflow::cli::run(std::env::args_os()));
}
