fn main() {
    std::process::exit(gaecoref::cli::run());
}
