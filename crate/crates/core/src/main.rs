fn main() {
    std::process::exit(einstein_limits::cli::run());
}
