fn main() {
    std::process::exit(relcomplete_cli::main_with_args(std::env::args_os()));
}
