fn main() {
    std::process::exit(tacit::cli::run());
}
