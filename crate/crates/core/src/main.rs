fn main() {
    std::process::exit(anisofrac::cli::run());
}
