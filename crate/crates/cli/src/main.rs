fn main() {
    std::process::exit(contactkit_cli::main_with_args(std::env::args_os()));
}
