fn main() {
    std::process::exit(nbf_core::cli::main());
}
