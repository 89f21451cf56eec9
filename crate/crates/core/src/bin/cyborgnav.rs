fn main() {
    std::process::exit(cyborgnav::cli::run());
}
