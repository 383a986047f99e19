fn main() {
    std::process::exit(phaselab::cli::parse_and_dispatch(std::env::args_os()));
}
