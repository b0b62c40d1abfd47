fn main() {
    std::process::exit(wnk_cli::main_from_args(std::env::args_os()));
}
