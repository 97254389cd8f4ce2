fn main() {
    std::process::exit(induclink::cli::run());
}
