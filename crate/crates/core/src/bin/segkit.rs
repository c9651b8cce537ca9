fn main() {
    std::process::exit(segkit::cli::main_with_args(std::env::args_os()));
}
