fn main() {
    std::process::exit(limitforge::cli::main());
}
