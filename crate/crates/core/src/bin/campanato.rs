fn main() {
    std::process::exit(campanato_lab::cli::main());
}
