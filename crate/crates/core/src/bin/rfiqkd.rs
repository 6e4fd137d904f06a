fn main() {
    std::process::exit(rfiqkd::cli::run(std::env::args_os()));
}
