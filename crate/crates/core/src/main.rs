fn main() {
    std::process::exit(jetcascade::cli::run());
}
