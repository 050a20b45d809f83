fn main() {
    std::process::exit(hedon_cli::main_with_args(std::env::args_os()));
}
