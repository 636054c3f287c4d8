fn main() {
    std::process::exit(greencell_cli::main_with_args(std::env::args_os()));
}
