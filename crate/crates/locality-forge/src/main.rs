fn main() {
    std::process::exit(locality_forge::cli::main_entry());
}
