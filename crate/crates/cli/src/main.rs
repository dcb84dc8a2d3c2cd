fn main() {
    std::process::exit(stap_cli::main_with_args(std::env::args_os()));
}
