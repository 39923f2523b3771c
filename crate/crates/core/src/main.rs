fn main() {
    std::process::exit(dctmars::cli::main_with_args(std::env::args_os()));
}
