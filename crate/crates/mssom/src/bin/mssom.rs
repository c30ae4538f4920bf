fn main() {
    std::process::exit(mssom::cli::run(std::env::args_os()));
}
