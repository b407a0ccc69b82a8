fn main() {
    std::process::exit(crossdiff::cli::run(std::env::args_os()));
}
