fn main() {
    std::process::exit(localzeta::cli::main_entry());
}
