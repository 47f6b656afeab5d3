fn main() {
    std::process::exit(driftlab::cli::run(std::env::args_os()));
}
