fn main() {
    std::process::exit(nametag_core::cli::run());
}
