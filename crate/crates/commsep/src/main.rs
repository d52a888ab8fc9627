fn main() {
    std::process::exit(commsep::cli::run());
}
