fn main() {
    std::process::exit(spiqgan_cli::main_exit(std::env::args_os()));
}
