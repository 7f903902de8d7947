fn main() {
    std::process::exit(amm_cli::main_with_args(std::env::args_os()));
}
