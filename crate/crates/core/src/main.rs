fn main() {
    std::process::exit(fairbayes::cli::main());
}
