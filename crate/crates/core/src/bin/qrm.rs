fn main() {
    std::process::exit(qrm::cli::main());
}
