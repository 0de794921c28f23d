fn main() {
    std::process::exit(mmbody::cli::main_with_args(std::env::args_os()));
}
