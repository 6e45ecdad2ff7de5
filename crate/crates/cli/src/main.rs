fn main() {
    std::process::exit(cryptorisk_cli::main_impl());
}
