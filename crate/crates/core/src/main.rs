fn main() {
    std::process::exit(kslab::cli::main_entry(std::env::args_os()));
}
