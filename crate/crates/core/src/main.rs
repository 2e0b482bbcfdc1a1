fn main() {
    std::process::exit(ringcov::cli::run());
}
