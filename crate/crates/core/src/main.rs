fn main() {
    std::process::exit(driftlearn::cli::main());
}
