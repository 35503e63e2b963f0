fn main() {
    std::process::exit(retrofit_control::cli::run());
}
