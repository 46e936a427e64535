fn main() {
    std::process::exit(vlhardy_cli::main_with(std::env::args_os()));
}
