fn main() {
    std::process::exit(rtil_cli::run());
}
